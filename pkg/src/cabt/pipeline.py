"""Front-to-back translation: image -> annotated VTM program."""

from dataclasses import dataclass, replace

from cabt.cachemodel import partition_cabs
from cabt.codegen import (
    BLOCK_ORIENTED, INSTRUCTION_ORIENTED, DetailLevel, emit_program,
)
from cabt.errors import InputError, MissingCacheSpec
from cabt.frontend import _partition, analyze_bases, build_cfg, decode_program, split_at_io
from cabt.timing import scoreboard_cycles

__all__ = ["Analysis", "analyze", "translate", "DetailLevel", "instruction_blocks"]


@dataclass(frozen=True)
class Analysis:
    blocks: tuple
    timings: tuple

    @property
    def leaders(self):
        return frozenset(b.start for b in self.blocks)


def analyze(image, desc, *, split=True) -> Analysis:
    """Decode, build the CFG, resolve bases, split at I/O and time each block."""
    ir = decode_program(image, desc)
    blocks = build_cfg(ir, image.entry)
    blocks = analyze_bases(blocks, image.memory_map, image.bus_map)
    if split:
        blocks = split_at_io(blocks)
    return _timed(blocks, desc)


def _timed(blocks, desc):
    timings = tuple(scoreboard_cycles(b, desc) for b in blocks)
    out = []
    for b, t in zip(blocks, timings):
        cabs = tuple(partition_cabs(b, desc.icache)) if desc.icache is not None else ()
        out.append(replace(b, static_cycles=t.static_cycles, cabs=cabs))
    return Analysis(tuple(out), timings)


def instruction_blocks(analysis: Analysis, desc) -> Analysis:
    """One block per source instruction, keeping the analysis annotations."""
    ir = [i for b in analysis.blocks for i in b.instrs]
    calls = sorted({i.src_addr + 4 for i in ir if i.op == "CALL"})
    return _timed(_partition(ir, {i.src_addr for i in ir}, calls), desc)


def translate(image, desc, level=DetailLevel.L1_static, variant=BLOCK_ORIENTED, analysis=None):
    level = DetailLevel.parse(level)
    if level >= DetailLevel.L3_branch_icache and desc.icache is None:
        raise MissingCacheSpec()
    if variant not in (BLOCK_ORIENTED, INSTRUCTION_ORIENTED):
        raise InputError(f"unknown variant {variant!r}")
    if analysis is None:
        analysis = analyze(image, desc)
    if variant == INSTRUCTION_ORIENTED:
        analysis = instruction_blocks(analysis, desc)
    return emit_program(analysis.blocks, analysis.timings, level, desc, variant, image=image)
