import random

from cabt.cachemodel import cab_key, cache_access, init_cache_region, partition_cabs
from cabt.frontend import build_cfg, decode_program
from cabt.procdesc import CacheSpec

from progen import words_to_image

CFG = CacheSpec(sets=16, ways=2, block_bytes=16, miss_penalty=10)


def test_cab_key_examples():
    assert cab_key(0x0, CFG) == (0, 0)
    assert cab_key(0x104, CFG) == (1, 0)
    assert cab_key(0x13C, CFG) == (1, 3)


def block_at(start, n, desc):
    img = words_to_image([0] * n, base=start)
    return build_cfg(decode_program(img, desc), start)[0]


def test_partition_examples(desc):
    assert len(partition_cabs(block_at(0x0, 4, desc), CFG)) == 1
    cabs = partition_cabs(block_at(0x8, 4, desc), CFG)
    assert [(c.first, c.last, c.index) for c in cabs] == [(0, 1, 0), (2, 3, 1)]
    assert len(partition_cabs(block_at(0x30, 1, desc), CFG)) == 1


def test_cold_miss_and_mru_hit():
    s = init_cache_region(CFG)
    assert cache_access(s, 7, 3, CFG) == (False, 10)
    assert cache_access(s, 7, 3, CFG) == (True, 0)


def test_lru_trace_a_b_a_c():
    s = init_cache_region(CFG)
    hits = [cache_access(s, t, 5, CFG)[0] for t in map(ord, "ABAC")]
    assert hits == [False, False, True, False]
    tags = {tag for valid, tag, _ in s.set_view(5) if valid}
    assert tags == {ord("A"), ord("C")}


def test_init_region_layout():
    s = init_cache_region(CFG)
    assert s.region_words == 16 * 2 * 2
    assert all(not v for st in range(16) for v, _, _ in s.set_view(st))
    assert [a for _, _, a in s.set_view(0)] == [0, 1]


def test_ages_stay_a_permutation():
    cfg = CacheSpec(sets=4, ways=4, block_bytes=32, miss_penalty=10)
    s = init_cache_region(cfg)
    rng = random.Random(8)
    for _ in range(2000):
        cache_access(s, rng.randrange(9), rng.randrange(4), cfg)
        for st in range(4):
            assert sorted(a for _, _, a in s.set_view(st)) == [0, 1, 2, 3]


def test_resident_program_second_pass_all_hits():
    s = init_cache_region(CFG)
    lines = [cab_key(a, CFG) for a in range(0, 16 * 2 * 16, 16)]
    misses = sum(not cache_access(s, t, i, CFG)[0] for t, i in lines)
    assert misses == len(lines)
    assert all(cache_access(s, t, i, CFG)[0] for t, i in lines)
