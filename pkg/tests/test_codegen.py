import pytest

from cabt import corpus
from cabt.asm import assemble
from cabt.codegen import (
    INSTRUCTION_ORIENTED, DetailLevel, TargetOp, annotate_block, program_from_json, program_to_json,
)
from cabt.errors import MissingCacheSpec
from cabt.frontend import build_cfg, decode_program
from cabt.oracle import OracleConfig, reference_run
from cabt.pipeline import analyze, translate
from cabt.procdesc import load_description, bundled_description_text
from cabt.timing import scoreboard_cycles
from cabt.vtm import vm_run

from progen import words_to_image


def first_block(src, desc, base=0):
    img = assemble(f".text {base:#x}\n" + src)
    blocks = build_cfg(decode_program(img, desc), base)
    return blocks[0]


def test_single_nop_block_l1(desc):
    img = assemble(".text 0x0\nnop\nnext: halt\n")
    ir = decode_program(img, desc)
    # force a boundary after the NOP so the block is the NOP alone
    from cabt.frontend import _partition
    blocks = _partition(ir, {0, 4}, [])
    tb = annotate_block(blocks[0], scoreboard_cycles(blocks[0], desc), 1, desc)
    assert [str(o) for o in tb.ops] == ["SYNC_START(1)", "NOP", "SYNC_WAIT", "JMP(1)"]


def test_forward_beq_check_values(desc):
    b = first_block("beq r1, r2, out\nnop\nout: halt\n", desc)
    tb = annotate_block(b, scoreboard_cycles(b, desc), 2, desc)
    check = [o for o in tb.ops if o.op == "BR_CHECK"][0]
    corr_taken, corr_not = check.args[-2:]
    assert (corr_taken, corr_not) == (4, 0)
    names = [o.op for o in tb.ops]
    assert names.index("BR_CHECK") < names.index("SYNC_WAIT") < names.index("CORR_FLUSH") < names.index("BR")


def test_l3_checks_each_line(desc):
    # straight-line block over [0x8, 0x18)
    img = words_to_image([0, 0, 0, 0, 0, 0x4C000000], base=0x0)
    ir = decode_program(img, desc)
    from cabt.frontend import _partition
    b = [x for x in _partition(ir, {0, 8, 0x18}, []) if x.start == 8][0]
    tb = annotate_block(b, scoreboard_cycles(b, desc), 3, desc)
    checks = [o.args for o in tb.ops if o.op == "CACHE_CHECK"]
    assert checks == [(0, 0), (0, 1)]


def test_l3_without_icache():
    import json
    d = json.loads(bundled_description_text())
    del d["icache"]
    desc = load_description(d)
    with pytest.raises(MissingCacheSpec):
        translate(corpus.load_program("gcd"), desc, 3)


def test_l1_sync_sum_equals_static_sum(desc):
    img = corpus.load_program("fir")
    analysis = analyze(img, desc)
    prog = translate(img, desc, 1, analysis=analysis)
    starts = sum(o.args[0] for b in prog.blocks for o in b.ops if o.op == "SYNC_START")
    assert starts == sum(t.static_cycles for t in analysis.timings)
    for b, t in zip(prog.blocks, analysis.timings):
        assert b.ops[0] == TargetOp("SYNC_START", (t.static_cycles,))


def test_instruction_variant_one_block_per_instruction(desc):
    img = assemble(".text 0x0\n" + "addi r1, r1, 1\n" * 9 + "halt\n")
    prog = translate(img, desc, 1, INSTRUCTION_ORIENTED)
    assert len(prog.blocks) == 10
    assert all(any(o.op == "TRAP" for o in b.ops) for b in prog.blocks)


def test_fir_l3_equals_block_flush_oracle(desc):
    img = corpus.load_program("fir")
    vm = vm_run(translate(img, desc, 3))
    assert vm.hwclock == reference_run(img, desc, OracleConfig.for_level(3)).hwclock == 5850


def test_cache_region_sized_from_geometry(desc):
    prog = translate(corpus.load_program("gcd"), desc, 3)
    assert prog.cache["words"] == 2 * 16 * 2
    assert translate(corpus.load_program("gcd"), desc, 2).cache is None


@pytest.mark.parametrize("level", [1, 2, 3])
def test_json_round_trip_preserves_run(desc, level):
    img = corpus.load_program("gcd")
    prog = translate(img, desc, level)
    text = program_to_json(prog)
    again = program_from_json(text)
    assert program_to_json(again) == text
    assert vm_run(again).hwclock == vm_run(prog).hwclock


def test_level_parse():
    assert DetailLevel.parse("L2") == DetailLevel.L2_branch
    assert DetailLevel.parse(3) == DetailLevel.L3_branch_icache
