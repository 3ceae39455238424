"""Decoding, basic-block recovery, base-address analysis and I/O splitting."""

from dataclasses import dataclass, replace
from typing import Optional

from cabt.errors import TargetOutOfRange
from cabt.image import IO, Memory, classify_address
from cabt.procdesc import LINK_REG, alu_eval, lookup_decode

CONTROL_OPS = frozenset({"BRANCH", "JUMP", "CALL", "JUMP_REG", "HALT"})
MEMORY_OPS = frozenset({"LOAD", "STORE"})

# access kinds recorded on LOAD/STORE by analyze_bases
ACCESS_MEMORY = "memory"
ACCESS_IO = "io"
ACCESS_DYNAMIC = "dynamic"


@dataclass(frozen=True)
class IRInstruction:
    src_addr: int
    op: str
    timing_class: str
    sub: Optional[str] = None  # ALU function or branch condition
    dst: Optional[int] = None
    srcs: tuple = ()
    imm: Optional[int] = None
    target: Optional[int] = None
    mnemonic: str = ""
    # filled by analyze_bases for LOAD/STORE
    access: Optional[str] = None
    known_addr: Optional[int] = None
    io_target: object = None

    @property
    def is_control(self):
        return self.op in CONTROL_OPS

    @property
    def is_isolated(self):
        """Needs its own block: a bus access or a runtime-classified access."""
        return self.access in (ACCESS_IO, ACCESS_DYNAMIC)


@dataclass(frozen=True)
class BasicBlock:
    id: int
    start: int
    end: int
    instrs: tuple
    successors: tuple = ()  # ((block id, edge kind), ...)
    static_cycles: Optional[int] = None
    cabs: tuple = ()

    @property
    def last(self):
        return self.instrs[-1]

    def __len__(self):
        return len(self.instrs)


def to_ir(decoded, addr) -> IRInstruction:
    i = decoded.idef
    fam = i.family
    sub = i.ir_op.split(".", 1)[1] if "." in i.ir_op else None
    common = dict(src_addr=addr, timing_class=i.timing_class, mnemonic=i.mnemonic, sub=sub)
    if fam == "nop":
        return IRInstruction(op="NOP", **common)
    if fam == "halt":
        return IRInstruction(op="HALT", **common)
    if fam == "alu":
        if i.format == "R":
            return IRInstruction(op="ALU", dst=decoded.rd, srcs=(decoded.rs1, decoded.rs2), **common)
        return IRInstruction(op="ALU", dst=decoded.rd, srcs=(decoded.rs1,), imm=decoded.imm, **common)
    if fam == "movi":
        return IRInstruction(op="MOVI", dst=decoded.rd, imm=decoded.imm, **common)
    if fam == "load":
        return IRInstruction(op="LOAD", dst=decoded.rd, srcs=(decoded.rs1,), imm=decoded.imm, **common)
    if fam == "store":
        # srcs: (value register, base register)
        return IRInstruction(op="STORE", srcs=(decoded.rd, decoded.rs1), imm=decoded.imm, **common)
    if fam == "branch":
        target = (addr + 4 + 4 * decoded.imm) & 0xFFFFFFFF
        return IRInstruction(op="BRANCH", srcs=(decoded.rd, decoded.rs1), imm=decoded.imm,
                             target=target, **common)
    if fam in ("jump", "call"):
        target = (addr + 4 + 4 * decoded.imm) & 0xFFFFFFFF
        if fam == "call":
            return IRInstruction(op="CALL", dst=LINK_REG, imm=decoded.imm, target=target, **common)
        return IRInstruction(op="JUMP", imm=decoded.imm, target=target, **common)
    if fam == "jump_reg":
        return IRInstruction(op="JUMP_REG", srcs=(decoded.rs1,), **common)
    raise AssertionError(i.ir_op)


def decode_program(image, desc) -> list:
    """One IR instruction per word of every executable section, in address order."""
    ir = []
    for sec in sorted(image.exec_sections, key=lambda s: s.base):
        for addr, word in image.words(sec):
            ir.append(to_ir(lookup_decode(desc, word, addr), addr))
    return ir


def _partition(ir, leaders, jal_returns):
    blocks = []
    cur = []
    for n, ins in enumerate(ir):
        if cur and (ins.src_addr in leaders or ins.src_addr != cur[-1].src_addr + 4):
            blocks.append(cur)
            cur = []
        cur.append(ins)
        if ins.is_control:
            blocks.append(cur)
            cur = []
    if cur:
        blocks.append(cur)

    by_start = {b[0].src_addr: n for n, b in enumerate(blocks)}
    out = []
    for n, instrs in enumerate(blocks):
        last = instrs[-1]
        end = last.src_addr + 4
        succ = []
        if last.op == "BRANCH":
            succ.append((by_start[last.target], "taken"))
            if end in by_start:
                succ.append((by_start[end], "fallthrough"))
        elif last.op == "JUMP":
            succ.append((by_start[last.target], "taken"))
        elif last.op == "CALL":
            succ.append((by_start[last.target], "call"))
        elif last.op == "JUMP_REG":
            succ.extend((by_start[a], "return-unknown") for a in jal_returns if a in by_start)
        elif last.op != "HALT" and end in by_start:
            succ.append((by_start[end], "fallthrough"))
        out.append(BasicBlock(n, instrs[0].src_addr, end, tuple(instrs), tuple(succ)))
    return out


def _jal_returns(ir):
    return sorted({i.src_addr + 4 for i in ir if i.op == "CALL"})


def build_cfg(ir, entry) -> list:
    """Partition decoded instructions into basic blocks and link them."""
    addrs = {i.src_addr for i in ir}
    leaders = {entry}
    prev = None
    for ins in ir:
        if prev is None or ins.src_addr != prev + 4:
            leaders.add(ins.src_addr)
        prev = ins.src_addr
        if ins.target is not None:
            if ins.target not in addrs:
                raise TargetOutOfRange(ins.src_addr, ins.target)
            leaders.add(ins.target)
        if ins.is_control:
            leaders.add(ins.src_addr + 4)
    rets = _jal_returns(ir)
    leaders.update(rets)
    return _partition(ir, leaders, rets)


def analyze_bases(blocks, mem, bus) -> list:
    """Intra-block constant propagation resolving load/store addresses."""
    out = []
    for b in blocks:
        known = {0: 0}
        instrs = []
        for ins in b.instrs:
            if ins.op in MEMORY_OPS:
                base = ins.srcs[0] if ins.op == "LOAD" else ins.srcs[1]
                if base in known:
                    addr = (known[base] + ins.imm) & 0xFFFFFFFF
                    cls = classify_address(mem, bus, addr)
                    if isinstance(cls, Memory):
                        ins = replace(ins, access=ACCESS_MEMORY, known_addr=addr, io_target=cls)
                    elif isinstance(cls, IO):
                        ins = replace(ins, access=ACCESS_IO, known_addr=addr, io_target=cls)
                    else:
                        ins = replace(ins, access=ACCESS_DYNAMIC)
                else:
                    ins = replace(ins, access=ACCESS_DYNAMIC)
            instrs.append(ins)

            if ins.dst is None or ins.dst == 0:
                continue
            if ins.op == "MOVI":
                known[ins.dst] = ins.imm & 0xFFFFFFFF
            elif ins.op == "ALU" and all(s in known for s in ins.srcs):
                a = known[ins.srcs[0]]
                c = known[ins.srcs[1]] if len(ins.srcs) > 1 else ins.imm & 0xFFFFFFFF
                known[ins.dst] = alu_eval(ins.sub, a, c)
            elif ins.op == "CALL":
                known[ins.dst] = ins.src_addr + 4
            else:
                known.pop(ins.dst, None)
        out.append(replace(b, instrs=tuple(instrs)))
    return out


def split_at_io(blocks) -> list:
    """Give every bus access and runtime-classified access a block of its own."""
    ir = [i for b in blocks for i in b.instrs]
    leaders = {b.start for b in blocks}
    for ins in ir:
        if ins.is_isolated:
            leaders.add(ins.src_addr)
            leaders.add(ins.src_addr + 4)
    return _partition(ir, leaders, _jal_returns(ir))


def block_of(blocks, addr):
    for b in blocks:
        if b.start <= addr < b.end:
            return b
    return None


def dump_cfg(blocks) -> str:
    lines = []
    for b in blocks:
        succ = " ".join(f"{t}:{k}" for t, k in b.successors)
        lines.append(f"{b.id} [{b.start:#x},{b.end:#x}) -> {succ}".rstrip())
    return "\n".join(lines) + "\n"
