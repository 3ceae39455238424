"""Program images plus the memory and bus maps that travel with them.

Image files are JSON manifests::

    {
      "entry": "0x0",
      "sections": [{"name": ".text", "base": "0x0", "data": "00000000..."}],
      "symbols": {"main": "0x0"},
      "memory_map": [{"src_base": "0x0", "src_end": "0x10000",
                      "dst_base": "0x100000", "kind": "RAM"}],
      "bus_map": [{"base": "0xf000", "end": "0xf100", "device": "uart"}]
    }

Sections whose name starts with ``.text`` are executable unless an explicit
``"exec"`` boolean says otherwise.  Without a ``memory_map`` the image gets
an identity-mapped RAM region covering ``[0, 0x10000)``.
"""

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import jsonschema

from cabt.errors import AlignmentError, OverlapError, SchemaError, SemanticError

DEFAULT_RAM = (0x0, 0x10000)

_HEX = {"type": "string", "pattern": "^(0[xX])?[0-9a-fA-F]+$"}

_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["entry", "sections"],
    "properties": {
        "entry": _HEX,
        "sections": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "base", "data"],
                "properties": {
                    "name": {"type": "string"},
                    "base": _HEX,
                    "data": {"type": "string", "pattern": "^([0-9a-fA-F]{2})*$"},
                    "exec": {"type": "boolean"},
                },
            },
        },
        "symbols": {"type": "object", "additionalProperties": _HEX},
        "memory_map": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["src_base", "src_end", "dst_base", "kind"],
                "properties": {
                    "src_base": _HEX,
                    "src_end": _HEX,
                    "dst_base": _HEX,
                    "kind": {"enum": ["RAM", "ROM"]},
                },
            },
        },
        "bus_map": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["base", "end", "device"],
                "properties": {"base": _HEX, "end": _HEX, "device": {"type": "string"}},
            },
        },
    },
}


@dataclass(frozen=True)
class Section:
    name: str
    base: int
    data: bytes
    exec: bool = True

    @property
    def end(self):
        return self.base + len(self.data)


@dataclass(frozen=True)
class MemRegion:
    src_base: int
    src_end: int
    dst_base: int
    kind: str = "RAM"

    @property
    def delta(self):
        return self.dst_base - self.src_base


@dataclass(frozen=True)
class IORegion:
    base: int
    end: int
    device: str


@dataclass(frozen=True)
class MemoryMap:
    regions: tuple = ()


@dataclass(frozen=True)
class BusMap:
    io_regions: tuple = ()


@dataclass(frozen=True)
class ProgramImage:
    entry: int
    sections: tuple
    symbols: dict = field(default_factory=dict)
    memory_map: MemoryMap = MemoryMap((MemRegion(*DEFAULT_RAM, DEFAULT_RAM[0]),))
    bus_map: BusMap = BusMap()

    def __hash__(self):
        return hash((self.entry, self.sections))

    @property
    def exec_sections(self):
        return tuple(s for s in self.sections if s.exec)

    def words(self, section):
        data = section.data
        for off in range(0, len(data), 4):
            yield section.base + off, int.from_bytes(data[off:off + 4], "little")


class Memory(NamedTuple):
    dst_addr: int
    region: MemRegion


class IO(NamedTuple):
    device: str
    offset: int


class Unmapped(NamedTuple):
    addr: int


Classification = Union[Memory, IO, Unmapped]


def classify_address(mem: MemoryMap, bus: BusMap, addr: int) -> Classification:
    for r in mem.regions:
        if r.src_base <= addr < r.src_end:
            return Memory(addr + r.delta, r)
    for r in bus.io_regions:
        if r.base <= addr < r.end:
            return IO(r.device, addr - r.base)
    return Unmapped(addr)


def _disjoint(ranges):
    ranges = sorted(ranges)
    return all(a[1] <= b[0] for a, b in zip(ranges, ranges[1:]))


def validate_maps(mem: MemoryMap, bus: BusMap):
    for r in mem.regions:
        if r.src_end <= r.src_base:
            raise SemanticError("memory_map", f"empty region at {r.src_base:#x}")
    if not _disjoint([(r.src_base, r.src_end) for r in mem.regions]):
        raise OverlapError("memory_map regions overlap in source space")
    if not _disjoint([(r.dst_base, r.dst_base + r.src_end - r.src_base) for r in mem.regions]):
        raise OverlapError("memory_map regions overlap in destination space")
    if not _disjoint([(r.base, r.end) for r in bus.io_regions]):
        raise OverlapError("bus_map regions overlap")
    ranges = [(r.src_base, r.src_end) for r in mem.regions] + [(r.base, r.end) for r in bus.io_regions]
    if not _disjoint(ranges):
        raise OverlapError("bus_map regions overlap memory_map regions")


def _validate(image: ProgramImage):
    for s in image.sections:
        if s.base % 4 or len(s.data) % 4:
            raise AlignmentError(f"section {s.name} is not word aligned/sized")
    if not _disjoint([(s.base, s.end) for s in image.sections if s.data]):
        raise OverlapError("sections overlap")
    validate_maps(image.memory_map, image.bus_map)
    for s in image.sections:
        if not s.data:
            continue
        c = classify_address(image.memory_map, image.bus_map, s.base)
        if not isinstance(c, Memory) or s.end > c.region.src_end:
            raise SemanticError("memory_map", f"section {s.name} not covered by a memory region")
    if image.entry % 4:
        raise AlignmentError(f"entry {image.entry:#x} not word aligned")
    if not any(s.base <= image.entry < s.end for s in image.exec_sections):
        raise SemanticError("entry", f"entry {image.entry:#x} not inside an executable section")


def _hex(text):
    return int(text, 16)


def image_from_dict(doc) -> ProgramImage:
    try:
        jsonschema.validate(doc, _SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SchemaError(path, e.message) from None
    sections = tuple(
        Section(
            s["name"],
            _hex(s["base"]),
            bytes.fromhex(s["data"]),
            s.get("exec", s["name"].startswith(".text")),
        )
        for s in doc["sections"]
    )
    kwargs = {}
    if "memory_map" in doc:
        kwargs["memory_map"] = MemoryMap(tuple(
            MemRegion(_hex(r["src_base"]), _hex(r["src_end"]), _hex(r["dst_base"]), r["kind"])
            for r in doc["memory_map"]
        ))
    if "bus_map" in doc:
        kwargs["bus_map"] = BusMap(tuple(
            IORegion(_hex(r["base"]), _hex(r["end"]), r["device"]) for r in doc["bus_map"]
        ))
    image = ProgramImage(
        entry=_hex(doc["entry"]),
        sections=sections,
        symbols={k: _hex(v) for k, v in doc.get("symbols", {}).items()},
        **kwargs,
    )
    _validate(image)
    return image


def load_image(document) -> ProgramImage:
    """Load an image manifest from JSON text/bytes or a parsed mapping."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise SchemaError("<document>", f"invalid JSON: {e}") from None
    return image_from_dict(document)


def maps_to_dict(mem: MemoryMap, bus: BusMap):
    return {
        "memory_map": [
            {"src_base": hex(r.src_base), "src_end": hex(r.src_end),
             "dst_base": hex(r.dst_base), "kind": r.kind}
            for r in mem.regions
        ],
        "bus_map": [
            {"base": hex(r.base), "end": hex(r.end), "device": r.device}
            for r in bus.io_regions
        ],
    }


def maps_from_dict(doc):
    mem = MemoryMap(tuple(
        MemRegion(_hex(r["src_base"]), _hex(r["src_end"]), _hex(r["dst_base"]), r["kind"])
        for r in doc["memory_map"]
    ))
    bus = BusMap(tuple(IORegion(_hex(r["base"]), _hex(r["end"]), r["device"]) for r in doc["bus_map"]))
    return mem, bus


def image_to_dict(image: ProgramImage):
    doc = {
        "entry": hex(image.entry),
        "sections": [],
    }
    for s in image.sections:
        rec = {"name": s.name, "base": hex(s.base), "data": s.data.hex()}
        if s.exec != s.name.startswith(".text"):
            rec["exec"] = s.exec
        doc["sections"].append(rec)
    if image.symbols:
        doc["symbols"] = {k: hex(v) for k, v in sorted(image.symbols.items())}
    doc.update(maps_to_dict(image.memory_map, image.bus_map))
    return doc


def store_image(image: ProgramImage) -> str:
    return json.dumps(image_to_dict(image), indent=1) + "\n"


def find_section(image: ProgramImage, addr) -> Optional[Section]:
    for s in image.sections:
        if s.base <= addr < s.end:
            return s
    return None
