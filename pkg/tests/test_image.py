import pytest
from hypothesis import given, strategies as st

from cabt import corpus
from cabt.asm import assemble, disassemble
from cabt.errors import AlignmentError, OverlapError, SchemaError
from cabt.image import (
    IO, BusMap, IORegion, Memory, MemoryMap, MemRegion, ProgramImage, Section, Unmapped,
    classify_address, load_image, store_image,
)


def test_single_nop_section(desc):
    img = load_image({"entry": "0x0", "sections": [{"name": ".text", "base": "0x0", "data": "00000000"}]})
    assert img.entry == 0
    assert list(img.words(img.sections[0])) == [(0, 0)]


def test_overlapping_sections():
    doc = {"entry": "0x0", "sections": [
        {"name": ".text", "base": "0x0", "data": "00000000"},
        {"name": ".data", "base": "0x0", "data": "01000000"},
    ]}
    with pytest.raises(OverlapError):
        load_image(doc)


def test_misaligned_section():
    doc = {"entry": "0x0", "sections": [{"name": ".text", "base": "0x2", "data": "00000000"}]}
    with pytest.raises(AlignmentError):
        load_image(doc)


def test_schema_rejects_unknown_key():
    with pytest.raises(SchemaError):
        load_image({"entry": "0x0", "sections": [], "stack": "0x0"})


def test_gcd_image_matches_source_and_disassembly():
    img = corpus.load_program("gcd")
    assert img == assemble(corpus.source("gcd"))
    again = assemble(disassemble(img))
    assert [s.data for s in again.sections] == [s.data for s in img.sections]
    assert again.entry == img.entry


def test_bundled_images_are_current():
    for name in corpus.ALL_PROGRAMS:
        assert store_image(assemble(corpus.source(name))) == corpus.image_text(name), name


def test_classify_examples():
    mem = MemoryMap((MemRegion(0x1000, 0x2000, 0x8000),))
    bus = BusMap((IORegion(0xF000, 0xF100, "uart"),))
    assert classify_address(mem, bus, 0x1004) == Memory(0x8004, mem.regions[0])
    assert classify_address(mem, bus, 0xF004) == IO("uart", 4)
    assert classify_address(MemoryMap(), BusMap(), 0xDEAD0000) == Unmapped(0xDEAD0000)


MEM = MemoryMap((MemRegion(0x0, 0x1000, 0x10000), MemRegion(0x2000, 0x3000, 0x0, "ROM")))
BUS = BusMap((IORegion(0x1000, 0x1100, "a"), IORegion(0x4000, 0x4010, "b")))


@given(st.integers(0, 0xFFFFFFFF))
def test_classify_is_a_partition(addr):
    c = classify_address(MEM, BUS, addr)
    in_mem = any(r.src_base <= addr < r.src_end for r in MEM.regions)
    in_io = any(r.base <= addr < r.end for r in BUS.io_regions)
    assert not (in_mem and in_io)
    assert isinstance(c, Memory) == in_mem
    assert isinstance(c, IO) == in_io
    assert isinstance(c, Unmapped) == (not in_mem and not in_io)


@st.composite
def images(draw):
    n = draw(st.integers(1, 3))
    sections, base = [], 0
    for k in range(n):
        base += 4 * draw(st.integers(0, 16))
        words = draw(st.lists(st.integers(0, 0xFFFFFFFF), min_size=1, max_size=8))
        data = b"".join(w.to_bytes(4, "little") for w in words)
        sections.append(Section(".text" if k == 0 else f".d{k}", base, data, draw(st.booleans()) or k == 0))
        base += len(data)
    entry = draw(st.sampled_from([sections[0].base + a for a in range(0, len(sections[0].data), 4)]))
    symbols = draw(st.dictionaries(st.from_regex(r"[a-z]{1,6}", fullmatch=True), st.integers(0, 0xFFFF), max_size=3))
    bus = BusMap((IORegion(0xF000, 0xF100, "uart"),)) if draw(st.booleans()) else BusMap()
    return ProgramImage(entry, tuple(sections), symbols, MemoryMap((MemRegion(0, 0x8000, 0x100000),)), bus)


@given(images())
def test_store_load_round_trip(img):
    assert load_image(store_image(img)) == img
