"""Virtual target machine: executes translated programs.

Cycle generation on the synchronization device is modelled as deferred
accounting.  ``SYNC_START(n)`` arms the device with ``n`` pending cycles and
``SYNC_WAIT`` moves them onto the hardware clock.  Bus accesses are only
legal while the device is idle, so they are always stamped with a clock
that already includes every cycle of the blocks before them.
"""

import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

from cabt.cachemodel import CacheState, cache_access
from cabt.errors import (
    AnalysisUnsound, DuplicateDevice, MemoryFault, OpLimitExceeded,
    SyncProtocolViolation, UnknownDevice,
)
from cabt.image import IO, Memory, classify_address
from cabt.procdesc import MASK32, NUM_REGS, CacheSpec, alu_eval, to_signed

DEFAULT_MAX_OPS = 10**8


class BusEvent(NamedTuple):
    hwclock: int
    device: str
    offset: int
    rw: str
    value: int


# ---------------------------------------------------------------- devices

class NullDevice:
    def read(self, hwclock, offset):
        return 0

    def write(self, hwclock, offset, value):
        pass


class CounterDevice:
    """Reads return how many accesses happened before this one."""

    def __init__(self):
        self.accesses = 0

    def read(self, hwclock, offset):
        n = self.accesses
        self.accesses += 1
        return n

    def write(self, hwclock, offset, value):
        self.accesses += 1


class UartDevice:
    """Offset 0 is the data register, offset 4 the receive-count register."""

    DATA = 0
    STATUS = 4

    def __init__(self, rx=b""):
        self.rx = bytearray(rx)
        self.tx = bytearray()
        self.tx_times = []

    def read(self, hwclock, offset):
        if offset == self.STATUS:
            return len(self.rx)
        if offset == self.DATA and self.rx:
            return self.rx.pop(0)
        return 0

    def write(self, hwclock, offset, value):
        if offset == self.DATA:
            self.tx.append(value & 0xFF)
            self.tx_times.append(hwclock)

    @property
    def output(self):
        return bytes(self.tx)


DEVICE_KINDS = {"null": NullDevice, "counter": CounterDevice, "uart": UartDevice}


def make_device(kind, arg=None):
    if kind not in DEVICE_KINDS:
        raise UnknownDevice(f"unknown device kind {kind!r}")
    if kind == "uart" and arg is not None:
        return UartDevice(arg.encode().decode("unicode_escape").encode("latin-1"))
    return DEVICE_KINDS[kind]()


class DeviceRegistry:
    def __init__(self):
        self._devices = {}

    def register(self, name, handler):
        if name in self._devices:
            raise DuplicateDevice(f"device {name!r} already registered")
        self._devices[name] = handler
        return handler

    def __getitem__(self, name):
        try:
            return self._devices[name]
        except KeyError:
            raise UnknownDevice(f"no device registered as {name!r}") from None

    def __contains__(self, name):
        return name in self._devices

    def names(self):
        return sorted(self._devices)


def register_device(registry, name, handler):
    return registry.register(name, handler)


# ---------------------------------------------------------------- memory

class RegionMemory:
    """Byte storage for the regions of a memory map, addressed by ``side``."""

    def __init__(self, memory_map, side="dst"):
        self.regions = []
        for r in memory_map.regions:
            base = r.dst_base if side == "dst" else r.src_base
            size = r.src_end - r.src_base
            self.regions.append([base, base + size, bytearray(size), r.kind])

    def _find(self, addr, size):
        for reg in self.regions:
            if reg[0] <= addr and addr + size <= reg[1]:
                return reg
        raise MemoryFault(f"no memory at {addr:#x}")

    def load_bytes(self, addr, data):
        reg = self._find(addr, len(data))
        off = addr - reg[0]
        reg[2][off:off + len(data)] = data

    def read32(self, addr):
        reg = self._find(addr, 4)
        off = addr - reg[0]
        return int.from_bytes(reg[2][off:off + 4], "little")

    def write32(self, addr, value):
        reg = self._find(addr, 4)
        if reg[3] == "ROM":
            raise MemoryFault(f"store to ROM at {addr:#x}")
        off = addr - reg[0]
        reg[2][off:off + 4] = (value & MASK32).to_bytes(4, "little")

    def read_bytes(self, addr, n):
        reg = self._find(addr, n)
        off = addr - reg[0]
        return bytes(reg[2][off:off + n])

    def digest(self):
        h = hashlib.sha256()
        for reg in self.regions:
            h.update(reg[2])
        return h.hexdigest()


# ---------------------------------------------------------------- results

@dataclass
class SyncDevice:
    pending: int = 0
    hwclock: int = 0
    busy: bool = False


@dataclass
class RunResult:
    hwclock: int
    host_ops: int
    bus_trace: list
    registers: tuple
    memory_digest: str
    static_cycles_sum: int = 0
    branch_correction_sum: int = 0
    cache_correction_sum: int = 0
    src_instructions: int = 0
    halted: bool = True
    clock_trace: list = field(default_factory=list)

    @property
    def breakdown(self):
        return (self.static_cycles_sum, self.branch_correction_sum, self.cache_correction_sum)

    def check_ledger(self):
        if self.hwclock != sum(self.breakdown):
            raise AssertionError(
                f"cycle ledger broken: hwclock {self.hwclock} != {self.breakdown}"
            )


def _cond(cond, a, b):
    if cond == "eq":
        return a == b
    if cond == "ne":
        return a != b
    return to_signed(a) < to_signed(b)


class Machine:
    """Single-run VTM state.  Not thread safe; one machine per run."""

    def __init__(self, prog, devices=None, max_ops=DEFAULT_MAX_OPS, record_clock=False):
        self.prog = prog
        self.devices = devices if devices is not None else DeviceRegistry()
        self.max_ops = max_ops
        self.regs = [0] * NUM_REGS
        self.corr = 0
        self.sync = SyncDevice()
        self.mem = RegionMemory(prog.memory_map, "dst")
        for base, data in prog.sections:
            c = classify_address(prog.memory_map, prog.bus_map, base)
            if not isinstance(c, Memory):
                raise MemoryFault(f"section at {base:#x} is not mapped to memory")
            self.mem.load_bytes(c.dst_addr, data)
        self.cache = self.cache_cfg = None
        if prog.cache is not None:
            self.cache_cfg = CacheSpec(**{k: prog.cache[k] for k in ("sets", "ways", "block_bytes", "miss_penalty")})
            self.cache = CacheState(self.cache_cfg.sets, self.cache_cfg.ways)
        self.block = prog.entry_block
        self.halted = False
        self.host_ops = 0
        self.bus_trace = []
        self.static_sum = 0
        self.branch_sum = 0
        self.cache_sum = 0
        self.src_instructions = 0
        self.record_clock = record_clock
        self.clock_trace = []

    # -- helpers
    @property
    def hwclock(self):
        return self.sync.hwclock

    @property
    def src_addr(self):
        """Source address of the next block to execute."""
        return self.prog.blocks[self.block].start

    def switch_program(self, prog):
        """Continue execution in another variant of the same program."""
        addr = self.src_addr
        self.prog = prog
        self.block = prog.addr_map[addr]

    def _bus(self, rw, device, offset, value=0):
        if self.sync.busy:
            raise SyncProtocolViolation("bus access while cycle generation is running")
        dev = self.devices[device]
        if rw == "r":
            value = dev.read(self.sync.hwclock, offset) & MASK32
        else:
            dev.write(self.sync.hwclock, offset, value)
        self.bus_trace.append(BusEvent(self.sync.hwclock, device, offset, rw, value))
        return value

    def _dispatch(self, kind, reg, base, imm):
        addr = (self.regs[base] + imm) & MASK32
        c = classify_address(self.prog.memory_map, self.prog.bus_map, addr)
        if isinstance(c, Memory):
            if kind == "load":
                if reg:
                    self.regs[reg] = self.mem.read32(c.dst_addr)
            else:
                self.mem.write32(c.dst_addr, self.regs[reg])
        elif isinstance(c, IO):
            if kind == "load":
                v = self._bus("r", c.device, c.offset)
                if reg:
                    self.regs[reg] = v
            else:
                self._bus("w", c.device, c.offset, self.regs[reg])
        else:
            raise MemoryFault(f"access to unmapped address {addr:#x}")

    # -- execution
    def step_block(self):
        """Execute the current translated block up to and including its transfer."""
        if self.halted:
            return
        blk = self.prog.blocks[self.block]
        ops = blk.ops
        if self.host_ops + len(ops) > self.max_ops:
            raise OpLimitExceeded(self.max_ops)
        regs = self.regs
        sync = self.sync
        mem = self.mem
        nxt = None
        for name, args in ops:
            if name == "ALU":
                fn, d, a, b = args
                if d:
                    regs[d] = alu_eval(fn, regs[a], regs[b])
            elif name == "ALUI":
                fn, d, a, imm = args
                if d:
                    regs[d] = alu_eval(fn, regs[a], imm & MASK32)
            elif name == "SYNC_START":
                if sync.busy:
                    raise SyncProtocolViolation("SYNC_START while cycle generation is running")
                sync.busy = True
                sync.pending = args[0]
                self.static_sum += args[0]
            elif name == "SYNC_WAIT":
                sync.hwclock += sync.pending
                sync.pending = 0
                sync.busy = False
            elif name == "CORR_FLUSH":
                sync.hwclock += self.corr
                self.corr = 0
            elif name == "MOVI":
                if args[0]:
                    regs[args[0]] = args[1]
            elif name == "LOAD":
                d, base, imm, delta, expect = args
                addr = (regs[base] + imm) & MASK32
                if expect is not None and addr != expect:
                    raise AnalysisUnsound(f"load at block {blk.start:#x}: {addr:#x} != {expect:#x}")
                v = mem.read32(addr + delta)
                if d:
                    regs[d] = v
            elif name == "STORE":
                s, base, imm, delta, expect = args
                addr = (regs[base] + imm) & MASK32
                if expect is not None and addr != expect:
                    raise AnalysisUnsound(f"store at block {blk.start:#x}: {addr:#x} != {expect:#x}")
                mem.write32(addr + delta, regs[s])
            elif name == "CACHE_CHECK":
                _hit, extra = cache_access(self.cache, args[0], args[1], self.cache_cfg)
                self.corr += extra
                self.cache_sum += extra
            elif name == "BR_CHECK":
                cond, a, b, _direction, c_taken, c_not = args
                k = c_taken if _cond(cond, regs[a], regs[b]) else c_not
                self.corr += k
                self.branch_sum += k
            elif name == "CORR_ADD":
                self.corr += args[0]
                self.branch_sum += args[0]
            elif name == "BR":
                cond, a, b, taken, fall = args
                nxt = taken if _cond(cond, regs[a], regs[b]) else fall
            elif name == "JMP":
                nxt = args[0]
            elif name == "JMP_REG":
                target = regs[args[0]]
                nxt = self.prog.addr_map.get(target)
                if nxt is None:
                    raise MemoryFault(f"indirect jump to {target:#x}, not a translated block")
            elif name == "HALT_T":
                self.halted = True
            elif name == "BUS_RD":
                v = self._bus("r", args[0], args[1])
                if args[2]:
                    regs[args[2]] = v
            elif name == "BUS_WR":
                self._bus("w", args[0], args[1], regs[args[2]])
            elif name == "ADDR_DISPATCH":
                self._dispatch(*args)
            elif name in ("NOP", "TRAP"):
                pass
            else:
                raise MemoryFault(f"unknown target op {name}")
        self.host_ops += len(ops)
        self.src_instructions += (blk.end - blk.start) // 4
        if self.record_clock:
            self.clock_trace.append(sync.hwclock)
        if self.halted:
            return
        if nxt is None or nxt < 0:
            raise MemoryFault(f"execution ran off the end of code after {blk.end - 4:#x}")
        self.block = nxt

    def run(self):
        while not self.halted:
            self.step_block()
        return self.result()

    def result(self) -> RunResult:
        res = RunResult(
            hwclock=self.sync.hwclock,
            host_ops=self.host_ops,
            bus_trace=list(self.bus_trace),
            registers=tuple(self.regs),
            memory_digest=self.mem.digest(),
            static_cycles_sum=self.static_sum,
            branch_correction_sum=self.branch_sum,
            cache_correction_sum=self.cache_sum,
            src_instructions=self.src_instructions,
            halted=self.halted,
            clock_trace=list(self.clock_trace),
        )
        if not self.sync.busy and self.corr == 0:
            res.check_ledger()
        return res


def bus_devices(prog):
    return sorted({o.args[0] for b in prog.blocks for o in b.ops if o.op in ("BUS_RD", "BUS_WR")})


def vm_run(prog, devices=None, max_ops=DEFAULT_MAX_OPS, record_clock=False) -> RunResult:
    devices = devices if devices is not None else DeviceRegistry()
    for name in bus_devices(prog):
        if name not in devices:
            raise UnknownDevice(f"program uses device {name!r}, which is not registered")
    return Machine(prog, devices, max_ops, record_clock).run()
