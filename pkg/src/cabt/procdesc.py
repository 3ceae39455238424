"""Processor description: instruction decode tables and timing parameters.

The description is a JSON document (see ``data/tk32.json`` for the shipped
TK32 ISA).  It is validated structurally with a JSON schema and then
semantically (unique opcodes, defined timing classes, cache geometry).
"""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import jsonschema

from cabt.errors import IllegalInstruction, SchemaError, SemanticError

WORD_BITS = 32
NUM_REGS = 16
LINK_REG = 15

FORMATS = ("R", "I", "J")
FLAGS = ("branch", "load", "store", "call", "halt")
ALU_FUNCS = ("add", "sub", "mul", "and", "or", "xor", "shl", "shr")
BRANCH_CONDS = ("eq", "ne", "lt")
IR_OPS = (
    ("nop", "halt", "movi", "load", "store", "jump", "call", "jump_reg")
    + tuple(f"alu.{f}" for f in ALU_FUNCS)
    + tuple(f"branch.{c}" for c in BRANCH_CONDS)
)

# ir_op family -> formats it may be encoded in
_ALLOWED_FORMATS = {
    "nop": FORMATS,
    "halt": FORMATS,
    "alu": ("R", "I"),
    "movi": ("I",),
    "load": ("I",),
    "store": ("I",),
    "branch": ("I",),
    "jump": ("J",),
    "call": ("J",),
    "jump_reg": ("R",),
}

_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "registers", "pipeline", "branch", "instructions"],
    "properties": {
        "name": {"type": "string"},
        "registers": {"type": "integer"},
        "pipeline": {
            "type": "object",
            "additionalProperties": False,
            "required": ["timing_classes"],
            "properties": {
                "issue_width": {"type": "integer"},
                "timing_classes": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "array",
                        "items": {"type": "integer"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "branch": {
            "type": "object",
            "additionalProperties": False,
            "required": ["policy", "mispredict_penalty", "taken_extra"],
            "properties": {
                "policy": {"type": "string"},
                "mispredict_penalty": {"type": "integer"},
                "taken_extra": {"type": "integer"},
            },
        },
        "icache": {
            "type": "object",
            "additionalProperties": False,
            "required": ["sets", "ways", "block_bytes", "miss_penalty"],
            "properties": {
                "sets": {"type": "integer"},
                "ways": {"type": "integer"},
                "block_bytes": {"type": "integer"},
                "miss_penalty": {"type": "integer"},
            },
        },
        "instructions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["mnemonic", "opcode", "format", "ir_op", "timing_class"],
                "properties": {
                    "mnemonic": {"type": "string"},
                    "opcode": {"type": "integer"},
                    "format": {"type": "string"},
                    "ir_op": {"type": "string"},
                    "timing_class": {"type": "string"},
                    "flags": {"type": "array", "items": {"type": "string"}},
                    "imm_shift": {"type": "integer"},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class TimingClass:
    issue_cycles: int
    result_latency: int


@dataclass(frozen=True)
class PipelineSpec:
    issue_width: int
    timing_classes: dict

    def __hash__(self):
        return hash((self.issue_width, tuple(sorted(self.timing_classes.items()))))


@dataclass(frozen=True)
class BranchSpec:
    policy: str
    mispredict_penalty: int
    taken_extra: int


@dataclass(frozen=True)
class CacheSpec:
    sets: int
    ways: int
    block_bytes: int
    miss_penalty: int

    @property
    def offset_bits(self):
        return self.block_bytes.bit_length() - 1

    @property
    def index_bits(self):
        return self.sets.bit_length() - 1


@dataclass(frozen=True)
class InstructionDef:
    mnemonic: str
    opcode: int
    format: str
    ir_op: str
    timing_class: str
    flags: frozenset = frozenset()
    imm_shift: int = 0

    @property
    def family(self):
        return self.ir_op.split(".", 1)[0]

    is_branch = property(lambda self: "branch" in self.flags)
    is_load = property(lambda self: "load" in self.flags)
    is_store = property(lambda self: "store" in self.flags)
    is_call = property(lambda self: "call" in self.flags)
    is_halt = property(lambda self: "halt" in self.flags)


@dataclass(frozen=True)
class ProcessorDescription:
    name: str
    instructions: tuple
    pipeline: PipelineSpec
    branch: BranchSpec
    icache: Optional[CacheSpec] = None
    word_size: int = WORD_BITS
    register_count: int = NUM_REGS

    def __post_init__(self):
        object.__setattr__(self, "_by_opcode", {i.opcode: i for i in self.instructions})
        object.__setattr__(self, "_by_mnemonic", {i.mnemonic: i for i in self.instructions})

    def by_opcode(self, opcode):
        return self._by_opcode.get(opcode)

    def by_mnemonic(self, mnemonic):
        return self._by_mnemonic[mnemonic.upper()]

    def timing(self, cls_name) -> TimingClass:
        return self.pipeline.timing_classes[cls_name]


@dataclass(frozen=True)
class Decoded:
    """An instruction definition plus the operand fields its format carries."""

    idef: InstructionDef
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: Optional[int] = None


def _power_of_two(n):
    return n > 0 and n & (n - 1) == 0


def _check(cond, field, message):
    if not cond:
        raise SemanticError(field, message)


def load_description(document) -> ProcessorDescription:
    """Parse and validate a processor description.

    ``document`` may be JSON text, bytes or an already-parsed mapping.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise SchemaError("<document>", f"invalid JSON: {e}") from None
    try:
        jsonschema.validate(document, _SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SchemaError(path, e.message) from None

    _check(document["registers"] == NUM_REGS, "registers", f"must be {NUM_REGS}")

    pipe = document["pipeline"]
    width = pipe.get("issue_width", 1)
    _check(width >= 1, "pipeline/issue_width", "must be >= 1")
    classes = {}
    for cname, (issue, latency) in pipe["timing_classes"].items():
        _check(issue >= 1, f"pipeline/timing_classes/{cname}", "issue_cycles must be >= 1")
        _check(latency >= 1, f"pipeline/timing_classes/{cname}", "result_latency must be >= 1")
        classes[cname] = TimingClass(issue, latency)

    br = document["branch"]
    _check(br["policy"] == "BTFNT", "branch/policy", "only BTFNT is supported")
    _check(br["mispredict_penalty"] >= 0, "branch/mispredict_penalty", "must be >= 0")
    _check(br["taken_extra"] >= 0, "branch/taken_extra", "must be >= 0")
    branch = BranchSpec("BTFNT", br["mispredict_penalty"], br["taken_extra"])

    icache = None
    if "icache" in document:
        ic = document["icache"]
        _check(_power_of_two(ic["sets"]), "icache/sets", "sets not a power of two")
        _check(ic["ways"] >= 1, "icache/ways", "must be >= 1")
        _check(
            _power_of_two(ic["block_bytes"]) and ic["block_bytes"] >= 4,
            "icache/block_bytes",
            "block_bytes must be a power of two >= 4",
        )
        _check(ic["miss_penalty"] >= 0, "icache/miss_penalty", "must be >= 0")
        _check(
            ic["sets"] * ic["ways"] * ic["block_bytes"] <= 1 << 20,
            "icache",
            "total size exceeds 2^20 bytes",
        )
        icache = CacheSpec(ic["sets"], ic["ways"], ic["block_bytes"], ic["miss_penalty"])
        tag_bits = WORD_BITS - icache.offset_bits - icache.index_bits
        _check(tag_bits <= 31, "icache", "tag wider than 31 bits")

    seen = {}
    instrs = []
    for n, raw in enumerate(document["instructions"]):
        where = f"instructions/{n}"
        op = raw["opcode"]
        _check(0 <= op < 64, f"{where}/opcode", "opcode must fit in 6 bits")
        if op in seen:
            raise SemanticError(f"{where}/opcode", f"duplicate opcode {op} ({seen[op]})")
        seen[op] = raw["mnemonic"]
        _check(raw["format"] in FORMATS, f"{where}/format", f"unknown format {raw['format']!r}")
        _check(raw["ir_op"] in IR_OPS, f"{where}/ir_op", f"unknown ir_op {raw['ir_op']!r}")
        family = raw["ir_op"].split(".", 1)[0]
        _check(
            raw["format"] in _ALLOWED_FORMATS[family],
            f"{where}/format",
            f"{raw['ir_op']} cannot use format {raw['format']}",
        )
        _check(
            raw["timing_class"] in classes,
            f"{where}/timing_class",
            f"undefined timing class {raw['timing_class']!r}",
        )
        flags = raw.get("flags", [])
        for f in flags:
            _check(f in FLAGS, f"{where}/flags", f"unknown flag {f!r}")
        _check(len(set(flags)) <= 1, f"{where}/flags", "flags are mutually exclusive")
        shift = raw.get("imm_shift", 0)
        _check(0 <= shift < WORD_BITS, f"{where}/imm_shift", "out of range")
        instrs.append(
            InstructionDef(
                mnemonic=raw["mnemonic"].upper(),
                opcode=op,
                format=raw["format"],
                ir_op=raw["ir_op"],
                timing_class=raw["timing_class"],
                flags=frozenset(flags),
                imm_shift=shift,
            )
        )
    mnemonics = [i.mnemonic for i in instrs]
    _check(len(set(mnemonics)) == len(mnemonics), "instructions", "duplicate mnemonic")

    return ProcessorDescription(
        name=document["name"],
        instructions=tuple(instrs),
        pipeline=PipelineSpec(width, classes),
        branch=branch,
        icache=icache,
    )


@lru_cache(maxsize=None)
def default_description() -> ProcessorDescription:
    """The bundled TK32 description."""
    return load_description(resources.files("cabt.data").joinpath("tk32.json").read_text())


def bundled_description_text():
    return resources.files("cabt.data").joinpath("tk32.json").read_text()


def _sext(value, bits):
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def lookup_decode(desc: ProcessorDescription, word: int, addr=None) -> Decoded:
    idef = desc.by_opcode((word >> 26) & 0x3F)
    if idef is None:
        raise IllegalInstruction(word, addr)
    rd = (word >> 21) & 0x1F
    rs1 = (word >> 16) & 0x1F
    rs2 = (word >> 11) & 0x1F
    if idef.format == "R":
        regs = (rd, rs1, rs2)
        imm = None
    elif idef.format == "I":
        regs = (rd, rs1)
        rs2 = 0
        imm = _sext(_sext(word, 16) << idef.imm_shift, WORD_BITS)
    else:
        regs = ()
        rd = rs1 = rs2 = 0
        imm = _sext(word, 26)
    for r in regs:
        if r >= NUM_REGS:
            raise IllegalInstruction(word, addr, f"register field {r} >= {NUM_REGS}")
    return Decoded(idef, rd, rs1, rs2, imm)


def encode(idef: InstructionDef, rd=0, rs1=0, rs2=0, imm=0) -> int:
    word = idef.opcode << 26
    if idef.format == "R":
        return word | rd << 21 | rs1 << 16 | rs2 << 11
    if idef.format == "I":
        field = imm >> idef.imm_shift
        if field << idef.imm_shift != imm or not -(1 << 15) <= field < (1 << 16):
            raise ValueError(f"immediate {imm} does not fit {idef.mnemonic}")
        return word | rd << 21 | rs1 << 16 | (field & 0xFFFF)
    if not -(1 << 25) <= imm < (1 << 25):
        raise ValueError(f"immediate {imm} does not fit {idef.mnemonic}")
    return word | (imm & 0x3FFFFFF)


MASK32 = 0xFFFFFFFF


def to_signed(v):
    v &= MASK32
    return v - (1 << 32) if v & 0x80000000 else v


def alu_eval(func, a, b):
    """32-bit result of an ALU micro-op on unsigned operands."""
    if func == "add":
        r = a + b
    elif func == "sub":
        r = a - b
    elif func == "mul":
        r = a * b
    elif func == "and":
        r = a & b
    elif func == "or":
        r = a | b
    elif func == "xor":
        r = a ^ b
    elif func == "shl":
        r = a << (b & 31)
    elif func == "shr":
        r = (a & MASK32) >> (b & 31)
    else:
        raise ValueError(func)
    return r & MASK32
