"""Source-level debugging over the dual translation.

The session keeps both emissions of the program and one machine state.
Normal execution uses the block-oriented variant; breakpoints therefore sit
on block leaders.  Reaching a point inside a block, and single stepping,
switch to the instruction-oriented variant, where every source instruction
is a block of its own.  Switches happen only at block boundaries of the
variant being left.

Text protocol (one request per line, one response line each)::

    b <hexaddr>        breakpoint <addr> leader <leader>
    c                  stopped breakpoint <addr> | halted | op_limit
    s                  stopped <addr> | halted
    regs               r0=00000000 r1=... r15=...
    mem <hexaddr> <n>  mem <addr> <hex bytes>
    cycles             cycles <n>
    q                  bye
"""

from cabt.codegen import BLOCK_ORIENTED, INSTRUCTION_ORIENTED
from cabt.errors import AddressOutOfRange, AlreadyHalted, CabtError, OpLimitExceeded
from cabt.image import Memory, classify_address
from cabt.pipeline import analyze, translate
from cabt.vtm import DEFAULT_MAX_OPS, Machine

RUNNING_BLOCK = "running_block"
STEPPING_INSTR = "stepping_instr"


class DebugSession:
    def __init__(self, image, desc, level=1, devices=None, max_ops=DEFAULT_MAX_OPS):
        self.image = image
        analysis = analyze(image, desc)
        self.blocks = analysis.blocks
        self.block_prog = translate(image, desc, level, BLOCK_ORIENTED, analysis=analysis)
        self.instr_prog = translate(image, desc, level, INSTRUCTION_ORIENTED, analysis=analysis)
        self.vm = Machine(self.block_prog, devices, max_ops)
        self.mode = RUNNING_BLOCK
        self.leaders = frozenset(self.block_prog.addr_map)
        self.requested = set()      # addresses the user asked to stop at
        self.breakpoints = set()    # normalized: block leaders
        self.step_to = {}           # leader -> mid-block addresses reached by stepping
        self.stopped_at = None

    # ------------------------------------------------------------ state
    @property
    def halted(self):
        return self.vm.halted

    @property
    def pc(self):
        return self.vm.src_addr

    def _leader_of(self, addr):
        for b in self.blocks:
            if b.start <= addr < b.end:
                return b.start
        raise AddressOutOfRange(addr)

    def _switch(self, mode):
        if mode != self.mode:
            self.vm.switch_program(self.block_prog if mode == RUNNING_BLOCK else self.instr_prog)
            self.mode = mode

    # ------------------------------------------------------------ operations
    def set_breakpoint(self, src_addr):
        if src_addr not in self.instr_prog.addr_map:
            raise AddressOutOfRange(src_addr)
        leader = self._leader_of(src_addr)
        self.breakpoints.add(leader)
        self.requested.add(src_addr)
        if src_addr != leader:
            self.step_to.setdefault(leader, set()).add(src_addr)
        return leader

    def cont(self):
        """Run until a requested address is reached or the program halts.

        Returns ``("breakpoint", addr)``, ``("halted", None)`` or
        ``("op_limit", None)``.
        """
        if self.halted:
            raise AlreadyHalted("program has halted")
        first = True
        try:
            while not self.halted:
                addr = self.pc
                if addr in self.requested and not (first and addr == self.stopped_at):
                    self.stopped_at = addr
                    return ("breakpoint", addr)
                first = False
                if addr in self.leaders:
                    # mode changes only at leaders of the block-oriented variant
                    self._switch(STEPPING_INSTR if addr in self.step_to else RUNNING_BLOCK)
                self.vm.step_block()
        except OpLimitExceeded:
            self.stopped_at = self.pc
            return ("op_limit", None)
        self.stopped_at = None
        return ("halted", None)

    def step(self):
        """Execute exactly one source instruction; returns the next address."""
        if self.halted:
            raise AlreadyHalted("program has halted")
        if self.mode == RUNNING_BLOCK:
            # stopped in block mode means we sit on a leader, a valid switch point
            self._switch(STEPPING_INSTR)
        self.vm.step_block()
        if self.halted:
            self.stopped_at = None
            return None
        self.stopped_at = self.pc
        return self.pc

    def registers(self):
        rmap = self.vm.prog.reg_map
        inverse = {t: s for s, t in rmap.items()}
        return {inverse[t]: v for t, v in enumerate(self.vm.regs) if t in inverse}

    def read_memory(self, src_addr, length):
        prog = self.vm.prog
        c = classify_address(prog.memory_map, prog.bus_map, src_addr)
        if not isinstance(c, Memory) or src_addr + length > c.region.src_end or length < 0:
            raise AddressOutOfRange(src_addr)
        return self.vm.mem.read_bytes(c.dst_addr, length)

    def inspect(self, what, addr=None, length=4):
        if what == "regs":
            return self.registers()
        if what == "mem":
            return self.read_memory(addr, length)
        if what == "cycles":
            return self.vm.hwclock
        raise ValueError(what)


def handle_command(session, line):
    """Execute one protocol request; returns (response line, keep going)."""
    parts = line.split()
    if not parts:
        return "error empty command", True
    cmd, args = parts[0], parts[1:]
    try:
        if cmd == "b" and len(args) == 1:
            addr = int(args[0], 16)
            leader = session.set_breakpoint(addr)
            return f"breakpoint {addr:#x} leader {leader:#x}", True
        if cmd == "c" and not args:
            reason, addr = session.cont()
            if reason == "breakpoint":
                return f"stopped breakpoint {addr:#x}", True
            return reason, True
        if cmd == "s" and not args:
            addr = session.step()
            return ("halted" if addr is None else f"stopped {addr:#x}"), True
        if cmd == "regs" and not args:
            regs = session.registers()
            return " ".join(f"r{r}={v:08x}" for r, v in sorted(regs.items())), True
        if cmd == "mem" and len(args) == 2:
            addr, n = int(args[0], 16), int(args[1], 0)
            return f"mem {addr:#x} {session.read_memory(addr, n).hex()}", True
        if cmd == "cycles" and not args:
            return f"cycles {session.vm.hwclock}", True
        if cmd == "q" and not args:
            return "bye", False
    except CabtError as e:
        return f"error {e}", True
    except ValueError as e:
        return f"error {e}", True
    return f"error unknown command {line.strip()!r}", True


def serve(session, instream, outstream):
    for line in instream:
        if not line.strip():
            continue
        reply, more = handle_command(session, line)
        outstream.write(reply + "\n")
        outstream.flush()
        if not more:
            break
