"""Emission of annotated VTM programs.

Every translated block starts by handing its static cycle count to the
synchronization device and waits for the generation to finish before it
transfers control.  Levels 2 and 3 add runtime correction code: a branch
check before the terminating conditional branch, cache-line checks at the
start of every cache analysis block, and a correction flush after the
wait.

Op layout of a block::

    SYNC_START(n)
    [CACHE_CHECK(tag, set) before the body ops of each CAB]     L3
    body ops
    [BR_CHECK(...)]                                             L2, L3
    SYNC_WAIT
    [CORR_FLUSH]                                                L2, L3
    [bus / runtime-dispatched access]     isolated blocks only
    [TRAP(addr)]                          instruction-oriented variant
    control transfer
"""

import enum
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from cabt.cachemodel import partition_cabs
from cabt.errors import InputError, MissingCacheSpec
from cabt.frontend import ACCESS_DYNAMIC, ACCESS_IO, ACCESS_MEMORY
from cabt.image import maps_from_dict, maps_to_dict
from cabt.timing import branch_correction, branch_direction, TAKEN, NOT_TAKEN

FORMAT_NAME = "cabt-translated"
FORMAT_VERSION = 1

BLOCK_ORIENTED = "block_oriented"
INSTRUCTION_ORIENTED = "instruction_oriented"

NO_BLOCK = -1


class DetailLevel(enum.IntEnum):
    L1_static = 1
    L2_branch = 2
    L3_branch_icache = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str) and value[:1] in "lL":
            value = value[1:]
        try:
            return cls(int(value))
        except (ValueError, TypeError):
            raise InputError(f"unknown detail level {value!r}") from None


OP_FIELDS = {
    "SYNC_START": ("n",),
    "SYNC_WAIT": (),
    "CORR_ADD": ("k",),
    "CORR_FLUSH": (),
    "CACHE_CHECK": ("tag", "index"),
    "BR_CHECK": ("cond", "a", "b", "direction", "corr_taken", "corr_not_taken"),
    "NOP": (),
    "ALU": ("fn", "dst", "a", "b"),
    "ALUI": ("fn", "dst", "a", "imm"),
    "MOVI": ("dst", "imm"),
    "LOAD": ("dst", "base", "imm", "delta", "expect"),
    "STORE": ("src", "base", "imm", "delta", "expect"),
    "BUS_RD": ("device", "offset", "dst"),
    "BUS_WR": ("device", "offset", "src"),
    "ADDR_DISPATCH": ("kind", "reg", "base", "imm"),
    "BR": ("cond", "a", "b", "taken", "fall"),
    "JMP": ("target",),
    "JMP_REG": ("reg",),
    "HALT_T": (),
    "TRAP": ("addr",),
}

CONTROL_TARGET_OPS = ("BR", "JMP", "JMP_REG", "HALT_T")


class TargetOp(NamedTuple):
    op: str
    args: tuple = ()

    def to_record(self):
        rec = {"op": self.op}
        rec.update(zip(OP_FIELDS[self.op], self.args))
        return rec

    @classmethod
    def from_record(cls, rec):
        name = rec["op"]
        if name not in OP_FIELDS:
            raise InputError(f"unknown target op {name!r}")
        return cls(name, tuple(rec[f] for f in OP_FIELDS[name]))

    def __str__(self):
        return self.op + ("(" + ", ".join(map(str, self.args)) + ")" if self.args else "")


def op(name, *args):
    return TargetOp(name, args)


@dataclass(frozen=True)
class TranslatedBlock:
    id: int
    start: int
    end: int
    ops: tuple


@dataclass(frozen=True)
class TranslatedProgram:
    blocks: tuple
    level: DetailLevel
    variant: str
    entry_block: int
    addr_map: dict
    memory_map: object
    bus_map: object
    sections: tuple = ()  # (base, bytes) initial memory contents, source addresses
    cache: Optional[dict] = None
    reg_map: dict = field(default_factory=lambda: {r: r for r in range(16)})

    def block_at(self, addr):
        return self.blocks[self.addr_map[addr]]


def _body_ops(ins):
    o = ins.op
    if o == "NOP":
        return [op("NOP")]
    if o == "ALU":
        if len(ins.srcs) == 2:
            return [op("ALU", ins.sub, ins.dst, ins.srcs[0], ins.srcs[1])]
        return [op("ALUI", ins.sub, ins.dst, ins.srcs[0], ins.imm)]
    if o == "MOVI":
        return [op("MOVI", ins.dst, ins.imm & 0xFFFFFFFF)]
    if o == "CALL":
        return [op("MOVI", ins.dst, ins.src_addr + 4)]
    if o in ("LOAD", "STORE") and ins.access == ACCESS_MEMORY:
        reg, base = (ins.dst, ins.srcs[0]) if o == "LOAD" else ins.srcs
        return [op(o, reg, base, ins.imm, ins.io_target.region.delta, ins.known_addr)]
    return []


def _isolated_ops(ins):
    reg, base = (ins.dst, ins.srcs[0]) if ins.op == "LOAD" else ins.srcs
    if ins.access == ACCESS_IO:
        dev, off = ins.io_target
        return [op("BUS_RD" if ins.op == "LOAD" else "BUS_WR", dev, off, reg)]
    assert ins.access == ACCESS_DYNAMIC
    return [op("ADDR_DISPATCH", ins.op.lower(), reg, base, ins.imm)]


def _succ(block, kind):
    for target, k in block.successors:
        if k == kind:
            return target
    return NO_BLOCK


def annotate_block(block, timing, level, desc, cabs=None, trap=False) -> TranslatedBlock:
    level = DetailLevel(level)
    if level >= DetailLevel.L3_branch_icache:
        if desc.icache is None:
            raise MissingCacheSpec()
        if cabs is None:
            cabs = partition_cabs(block, desc.icache)
    ops = [op("SYNC_START", timing.static_cycles)]
    checks = {c.first: c for c in cabs} if level >= DetailLevel.L3_branch_icache else {}
    late = []
    last = block.instrs[-1]
    for pos, ins in enumerate(block.instrs):
        if pos in checks:
            ops.append(op("CACHE_CHECK", checks[pos].tag, checks[pos].index))
        if ins.is_isolated:
            late += _isolated_ops(ins)
        else:
            ops += _body_ops(ins)
    if last.op == "BRANCH" and level >= DetailLevel.L2_branch:
        d = branch_direction(last)
        issue = desc.timing(last.timing_class).issue_cycles
        ops.append(op(
            "BR_CHECK", last.sub, last.srcs[0], last.srcs[1], d,
            branch_correction(desc, d, TAKEN, issue),
            branch_correction(desc, d, NOT_TAKEN, issue),
        ))
    ops.append(op("SYNC_WAIT"))
    if level >= DetailLevel.L2_branch:
        ops.append(op("CORR_FLUSH"))
    ops += late
    if trap:
        ops.append(op("TRAP", last.src_addr))

    if last.op == "BRANCH":
        ops.append(op("BR", last.sub, last.srcs[0], last.srcs[1],
                      _succ(block, "taken"), _succ(block, "fallthrough")))
    elif last.op == "JUMP":
        ops.append(op("JMP", _succ(block, "taken")))
    elif last.op == "CALL":
        ops.append(op("JMP", _succ(block, "call")))
    elif last.op == "JUMP_REG":
        ops.append(op("JMP_REG", last.srcs[0]))
    elif last.op == "HALT":
        ops.append(op("HALT_T"))
    else:
        ops.append(op("JMP", _succ(block, "fallthrough")))
    return TranslatedBlock(block.id, block.start, block.end, tuple(ops))


def emit_program(blocks, timings, level, desc, variant=BLOCK_ORIENTED, *, image=None, entry=None):
    """Annotate every block and assemble the translated program.

    ``blocks`` must already be partitioned for ``variant`` (see
    :func:`cabt.pipeline.translate`, which builds the one-instruction blocks
    of the instruction-oriented variant).
    """
    level = DetailLevel(level)
    if level >= DetailLevel.L3_branch_icache and desc.icache is None:
        raise MissingCacheSpec()
    trap = variant == INSTRUCTION_ORIENTED
    tblocks = tuple(
        annotate_block(b, t, level, desc, b.cabs or None, trap=trap) for b, t in zip(blocks, timings)
    )
    addr_map = {b.start: b.id for b in blocks}
    cache = None
    if level >= DetailLevel.L3_branch_icache:
        ic = desc.icache
        cache = {
            "sets": ic.sets,
            "ways": ic.ways,
            "block_bytes": ic.block_bytes,
            "miss_penalty": ic.miss_penalty,
            "offset": sum(len(b.ops) for b in tblocks),
            "words": 2 * ic.sets * ic.ways,
        }
    if entry is None:
        entry = image.entry if image is not None else blocks[0].start
    sections = tuple((s.base, s.data) for s in image.sections) if image is not None else ()
    return TranslatedProgram(
        blocks=tblocks,
        level=level,
        variant=variant,
        entry_block=addr_map[entry],
        addr_map=addr_map,
        memory_map=image.memory_map if image is not None else None,
        bus_map=image.bus_map if image is not None else None,
        sections=sections,
        cache=cache,
    )


def program_to_json(prog: TranslatedProgram) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "level": int(prog.level),
        "variant": prog.variant,
        "entry_block": prog.entry_block,
        "reg_map": {f"r{k}": f"r{v}" for k, v in prog.reg_map.items()},
        "addr_map": {hex(k): v for k, v in sorted(prog.addr_map.items())},
        "cache": prog.cache,
        "sections": [{"base": hex(b), "data": d.hex()} for b, d in prog.sections],
        "blocks": [
            {"id": b.id, "start": hex(b.start), "end": hex(b.end),
             "ops": [o.to_record() for o in b.ops]}
            for b in prog.blocks
        ],
    }
    doc.update(maps_to_dict(prog.memory_map, prog.bus_map))
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def program_from_json(text) -> TranslatedProgram:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"translated program is not valid JSON: {e}") from None
    if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
        raise InputError("not a translated program (format/version mismatch)")
    try:
        mem, bus = maps_from_dict(doc)
        blocks = tuple(
            TranslatedBlock(b["id"], int(b["start"], 16), int(b["end"], 16),
                            tuple(TargetOp.from_record(r) for r in b["ops"]))
            for b in doc["blocks"]
        )
        return TranslatedProgram(
            blocks=blocks,
            level=DetailLevel(doc["level"]),
            variant=doc["variant"],
            entry_block=doc["entry_block"],
            addr_map={int(k, 16): v for k, v in doc["addr_map"].items()},
            memory_map=mem,
            bus_map=bus,
            sections=tuple((int(s["base"], 16), bytes.fromhex(s["data"])) for s in doc["sections"]),
            cache=doc["cache"],
            reg_map={int(k[1:]): int(v[1:]) for k, v in doc["reg_map"].items()},
        )
    except (KeyError, ValueError, TypeError) as e:
        raise InputError(f"malformed translated program: {e!r}") from None
