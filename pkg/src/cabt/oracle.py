"""Interpretive reference simulator for TK32 programs.

Runs the source program instruction by instruction (fetch, decode,
execute) with its own register file and memory, and counts cycles with
the same scoreboard, branch and cache rules the translator uses.  It never
looks at translated code, so agreement between the two is evidence that
the translation is right rather than a tautology.

Two pipeline regimes are available:

* block-flush: the scoreboard is cleared at every basic-block leader and
  each block is billed like the translator bills it;
* continuous: one scoreboard for the whole run, so latencies, branch
  penalties and fetch misses delay the following instructions directly.
"""

from dataclasses import dataclass, field

from cabt.cachemodel import cab_key, cache_access, init_cache_region
from cabt.codegen import DetailLevel
from cabt.errors import MemoryFault, MissingCacheSpec, OpLimitExceeded
from cabt.image import IO, Memory, classify_address
from cabt.pipeline import analyze
from cabt.procdesc import LINK_REG, NUM_REGS, lookup_decode
from cabt.timing import (
    BACKWARD, FORWARD, NOT_TAKEN, TAKEN, Scoreboard, branch_cost, branch_min,
)
from cabt.vtm import DEFAULT_MAX_OPS, BusEvent, DeviceRegistry, RegionMemory, RunResult

M32 = 0xFFFFFFFF


@dataclass(frozen=True)
class OracleConfig:
    block_flush: bool = True
    model_branch: bool = False
    model_icache: bool = False
    continuous: bool = False

    def __post_init__(self):
        if self.continuous == self.block_flush:
            raise ValueError("exactly one of block_flush and continuous must be set")

    @classmethod
    def for_level(cls, level):
        level = DetailLevel.parse(level)
        return cls(
            block_flush=True,
            model_branch=level >= DetailLevel.L2_branch,
            model_icache=level >= DetailLevel.L3_branch_icache,
        )

    @classmethod
    def full_continuous(cls):
        return cls(block_flush=False, continuous=True, model_branch=True, model_icache=True)


@dataclass
class OracleResult(RunResult):
    instr_trace: list = field(default_factory=list)


def _signed(v):
    return v - (1 << 32) if v & 0x80000000 else v


def _alu(func, a, b):
    if func == "add":
        return (a + b) & M32
    if func == "sub":
        return (a - b) & M32
    if func == "mul":
        return (a * b) & M32
    if func == "and":
        return a & b
    if func == "or":
        return a | b
    if func == "xor":
        return a ^ b
    if func == "shl":
        return (a << (b & 31)) & M32
    if func == "shr":
        return a >> (b & 31)
    raise ValueError(func)


def _operands(d):
    """(source registers, destination register) of a decoded instruction."""
    fam = d.idef.family
    if fam == "alu":
        return ((d.rs1, d.rs2) if d.idef.format == "R" else (d.rs1,)), d.rd
    if fam == "movi":
        return (), d.rd
    if fam == "load":
        return (d.rs1,), d.rd
    if fam in ("store", "branch"):
        return (d.rd, d.rs1), None
    if fam == "call":
        return (), LINK_REG
    if fam == "jump_reg":
        return (d.rs1,), None
    return (), None


def reference_run(image, desc, cfg=OracleConfig(), devices=None, max_ops=DEFAULT_MAX_OPS,
                  trace=False, leaders=None) -> OracleResult:
    if cfg.model_icache and desc.icache is None:
        raise MissingCacheSpec()
    devices = devices if devices is not None else DeviceRegistry()
    if cfg.block_flush and leaders is None:
        leaders = analyze(image, desc).leaders
    mem_map, bus_map = image.memory_map, image.bus_map

    code = {}
    for sec in image.exec_sections:
        for addr, word in image.words(sec):
            code[addr] = word
    decoded = {}

    regs = [0] * NUM_REGS
    mem = RegionMemory(mem_map, "src")
    for s in image.sections:
        mem.load_bytes(s.base, s.data)

    icfg = desc.icache
    cache = init_cache_region(icfg) if cfg.model_icache else None
    last_line = None
    width = desc.pipeline.issue_width
    sb = Scoreboard(width)
    closed = 0  # static cycles of finished blocks (block-flush)
    branch_sum = 0
    cache_sum = 0
    bus_trace = []
    itrace = []
    steps = 0
    pc = image.entry
    started = False

    def stamp():
        if cfg.block_flush:
            return closed + sb.end + branch_sum + cache_sum
        return sb.end

    def bus(rw, c, value=0):
        dev = devices[c.device]
        now = stamp()
        if rw == "r":
            value = dev.read(now, c.offset) & M32
        else:
            dev.write(now, c.offset, value)
        bus_trace.append(BusEvent(now, c.device, c.offset, rw, value))
        return value

    while True:
        if steps >= max_ops:
            raise OpLimitExceeded(max_ops)
        steps += 1
        d = decoded.get(pc)
        if d is None:
            if pc not in code:
                raise MemoryFault(f"instruction fetch from {pc:#x} outside executable sections")
            d = decoded[pc] = lookup_decode(desc, code[pc], pc)
        if trace:
            itrace.append(pc)

        if cfg.block_flush and started and pc in leaders:
            closed += sb.end
            sb = Scoreboard(width)
        started = True

        if cache is not None:
            line = cab_key(pc, icfg)
            if line != last_line:
                last_line = line
                _hit, extra = cache_access(cache, line[0], line[1], icfg)
                cache_sum += extra
                if cfg.continuous:
                    sb.stall(extra)

        idef = d.idef
        fam = idef.family
        tc = desc.timing(idef.timing_class)
        srcs, dst = _operands(d)
        nxt = (pc + 4) & M32
        occupancy = tc.issue_cycles

        if fam == "branch":
            cond = idef.ir_op.split(".")[1]
            a, b = regs[d.rd], regs[d.rs1]
            taken = a == b if cond == "eq" else a != b if cond == "ne" else _signed(a) < _signed(b)
            target = (pc + 4 + 4 * d.imm) & M32
            direction = BACKWARD if target <= pc else FORWARD
            floor = branch_min(desc, direction, tc.issue_cycles)
            if cfg.model_branch:
                cost = branch_cost(desc, direction, TAKEN if taken else NOT_TAKEN, tc.issue_cycles)
            else:
                cost = floor
            # block-flush bills the floor statically and the rest as a correction
            occupancy = floor if cfg.block_flush else cost
            branch_sum += cost - floor
            if taken:
                nxt = target
            sb.issue(srcs, dst, occupancy, tc.result_latency)
        elif fam in ("jump", "call", "jump_reg"):
            occupancy = tc.issue_cycles + desc.branch.taken_extra
            sb.issue(srcs, dst, occupancy, tc.result_latency)
            if fam == "jump_reg":
                nxt = regs[d.rs1]
            else:
                nxt = (pc + 4 + 4 * d.imm) & M32
                if fam == "call":
                    regs[LINK_REG] = (pc + 4) & M32
        else:
            sb.issue(srcs, dst, occupancy, tc.result_latency)
            if fam == "alu":
                b = regs[d.rs2] if idef.format == "R" else d.imm & M32
                if d.rd:
                    regs[d.rd] = _alu(idef.ir_op.split(".")[1], regs[d.rs1], b)
            elif fam == "movi":
                if d.rd:
                    regs[d.rd] = d.imm & M32
            elif fam in ("load", "store"):
                addr = (regs[d.rs1] + d.imm) & M32
                c = classify_address(mem_map, bus_map, addr)
                if isinstance(c, Memory):
                    if fam == "load":
                        v = mem.read32(addr)
                        if d.rd:
                            regs[d.rd] = v
                    else:
                        mem.write32(addr, regs[d.rd])
                elif isinstance(c, IO):
                    if fam == "load":
                        v = bus("r", c)
                        if d.rd:
                            regs[d.rd] = v
                    else:
                        bus("w", c, regs[d.rd])
                else:
                    raise MemoryFault(f"access to unmapped address {addr:#x} at {pc:#x}")
            elif fam == "halt":
                break

        pc = nxt

    if cfg.block_flush:
        static = closed + sb.end
        total = static + branch_sum + cache_sum
    else:
        total = sb.end
        static = total - branch_sum - cache_sum
    return OracleResult(
        hwclock=total,
        host_ops=steps,
        bus_trace=bus_trace,
        registers=tuple(regs),
        memory_digest=mem.digest(),
        static_cycles_sum=static,
        branch_correction_sum=branch_sum,
        cache_correction_sum=cache_sum,
        src_instructions=steps,
        instr_trace=itrace,
    )


def run_oracle_level(image, desc, level, devices=None, **kw):
    return reference_run(image, desc, OracleConfig.for_level(level), devices, **kw)

