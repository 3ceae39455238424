import random

from cabt.asm import assemble
from cabt.frontend import build_cfg, decode_program
from cabt.timing import (
    BACKWARD, FORWARD, NOT_TAKEN, TAKEN, branch_correction, branch_cost, branch_min, dump_timing,
    scoreboard_cycles,
)

from progen import random_straight_block, words_to_image


def only_block(src, desc):
    img = assemble(".text 0x0\n" + src)
    blocks = build_cfg(decode_program(img, desc), 0)
    assert len(blocks) == 1
    return blocks[0]


def test_single_nop(desc):
    assert scoreboard_cycles(only_block("nop\n", desc), desc).static_cycles == 1


def test_independent_adds_then_dependent(desc):
    b = only_block("add r1, r2, r3\nadd r4, r5, r6\nadd r7, r1, r4\n", desc)
    assert scoreboard_cycles(b, desc).static_cycles == 3


def test_mul_latency_stalls_consumer(desc):
    b = only_block("mul r1, r2, r3\nadd r4, r1, r1\n", desc)
    assert scoreboard_cycles(b, desc).static_cycles == 4


def test_writes_to_r0_create_no_dependency(desc):
    b = only_block("mul r0, r2, r3\nadd r4, r0, r0\n", desc)
    assert scoreboard_cycles(b, desc).static_cycles == 2


def test_branch_costs(desc):
    assert branch_cost(desc, FORWARD, NOT_TAKEN) == 1
    assert branch_cost(desc, FORWARD, TAKEN) == 5
    assert branch_correction(desc, FORWARD, TAKEN) == 4
    assert branch_correction(desc, FORWARD, NOT_TAKEN) == 0
    assert branch_cost(desc, BACKWARD, TAKEN) == 2
    assert branch_cost(desc, BACKWARD, NOT_TAKEN) == 4
    assert branch_min(desc, BACKWARD) == 2


def test_corrections_never_negative(desc):
    for d in (FORWARD, BACKWARD):
        for o in (TAKEN, NOT_TAKEN):
            assert branch_correction(desc, d, o) >= 0


def test_terminating_backward_branch_billed_at_min(desc):
    img = assemble(".text 0x0\ntop: add r1, r1, r1\nbne r1, r0, top\nhalt\n")
    blocks = build_cfg(decode_program(img, desc), 0)
    t = scoreboard_cycles(blocks[0], desc)
    assert (t.static_cycles, t.branch_min) == (3, 2)


def test_appending_never_decreases_cycles(desc):
    rng = random.Random(5)
    for _ in range(100):
        words = random_straight_block(rng, 20, desc)[:-1]
        prev = 0
        for n in range(1, len(words) + 1):
            img = words_to_image(words[:n])
            block = build_cfg(decode_program(img, desc), 0)[0]
            cyc = scoreboard_cycles(block, desc).static_cycles
            assert cyc >= prev
            prev = cyc


def test_dump_timing_csv(desc):
    b = only_block("nop\n", desc)
    assert dump_timing([scoreboard_cycles(b, desc)]) == "block,static_cycles,branch_min\n0,1,0\n"
