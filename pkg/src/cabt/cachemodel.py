"""Instruction-cache simulation data and the per-line hit/miss check.

Each set holds ``ways`` combined words (bit 0 valid, bits 31..1 tag) and
``ways`` LRU ages forming a permutation of ``0..ways-1`` (0 = most recently
used).  The translated program carries this state in a region appended
after its code; the VTM executes :func:`cache_access` for every
``CACHE_CHECK`` op.
"""

from dataclasses import dataclass

WORD_BYTES = 4


@dataclass(frozen=True)
class CacheAnalysisBlock:
    block_id: int
    tag: int
    index: int
    first: int  # instruction positions within the parent block, inclusive
    last: int


def cab_key(addr, cfg):
    line = addr >> cfg.offset_bits
    return line >> cfg.index_bits, line & (cfg.sets - 1)


def partition_cabs(block, cfg) -> list:
    cabs = []
    first = 0
    key = cab_key(block.instrs[0].src_addr, cfg)
    for pos, ins in enumerate(block.instrs[1:], 1):
        k = cab_key(ins.src_addr, cfg)
        if k != key:
            cabs.append(CacheAnalysisBlock(block.id, key[0], key[1], first, pos - 1))
            first, key = pos, k
    cabs.append(CacheAnalysisBlock(block.id, key[0], key[1], first, len(block.instrs) - 1))
    return cabs


class CacheState:
    """Flat combined-word and age arrays, indexed ``set * ways + way``."""

    __slots__ = ("sets", "ways", "words", "ages")

    def __init__(self, sets, ways):
        self.sets = sets
        self.ways = ways
        self.words = [0] * (sets * ways)
        self.ages = list(range(ways)) * sets

    @property
    def region_words(self):
        return 2 * self.sets * self.ways

    def valid(self, s, w):
        return self.words[s * self.ways + w] & 1

    def tag(self, s, w):
        return self.words[s * self.ways + w] >> 1

    def set_view(self, s):
        """(valid, tag, age) per way of set ``s``."""
        base = s * self.ways
        return [
            (self.words[base + w] & 1, self.words[base + w] >> 1, self.ages[base + w])
            for w in range(self.ways)
        ]

    def snapshot(self):
        return tuple(self.words), tuple(self.ages)


def init_cache_region(cfg) -> CacheState:
    return CacheState(cfg.sets, cfg.ways)


def _renew(ages, base, ways, way):
    old = ages[base + way]
    for w in range(base, base + ways):
        if ages[w] < old:
            ages[w] += 1
    ages[base + way] = 0


def cache_access(state: CacheState, tag, index, cfg):
    """Look up one cache line; returns ``(hit, extra_cycles)``."""
    ways = state.ways
    base = index * ways
    words = state.words
    want = (tag << 1) | 1
    for w in range(ways):
        if words[base + w] == want:
            _renew(state.ages, base, ways, w)
            return True, 0
    ages = state.ages
    victim = ages.index(ways - 1, base, base + ways) - base
    words[base + victim] = want
    _renew(ages, base, ways, victim)
    return False, cfg.miss_penalty


def dump_cabs(blocks_cabs) -> str:
    lines = ["block,cab,tag,set"]
    for cabs in blocks_cabs:
        for n, c in enumerate(cabs):
            lines.append(f"{c.block_id},{n},{c.tag},{c.index}")
    return "\n".join(lines) + "\n"
