"""Random TK32 program generators and small builders shared by the tests."""

import random

from cabt.codegen import BLOCK_ORIENTED, DetailLevel, TargetOp, TranslatedBlock, TranslatedProgram
from cabt.image import BusMap, IORegion, MemoryMap, MemRegion, ProgramImage, Section
from cabt.procdesc import default_description, encode

RAM = MemoryMap((MemRegion(0x0, 0x10000, 0x0),))
IO_BUS = BusMap((IORegion(0xF000, 0xF100, "dev"),))

ALU_R = ("add", "sub", "and", "or", "xor", "shl", "shr")


def words_to_image(words, base=0, memory_map=RAM, bus_map=BusMap(), entry=None):
    data = b"".join(w.to_bytes(4, "little") for w in words)
    return ProgramImage(
        entry=base if entry is None else entry,
        sections=(Section(".text", base, data),),
        memory_map=memory_map,
        bus_map=bus_map,
    )


def enc(mnemonic, desc=None, **fields):
    desc = desc or default_description()
    return encode(desc.by_mnemonic(mnemonic), **fields)


def random_program(rng, n=None, desc=None, memory_ops=True):
    """Random decodable program whose control targets stay inside it.

    Loads and stores use either r0 plus a RAM/IO offset (known base) or a
    random register (unknown base).  Not guaranteed to terminate.
    """
    desc = desc or default_description()
    n = n or rng.randint(1, 60)
    words = []
    for k in range(n):
        kind = rng.choice(("alu", "alu", "alui", "mul", "lui", "nop", "mem", "br", "j", "jal", "jr", "halt"))
        r = lambda: rng.randrange(16)
        if kind == "alu":
            words.append(enc(rng.choice(ALU_R), desc, rd=r(), rs1=r(), rs2=r()))
        elif kind == "alui":
            words.append(enc("addi", desc, rd=r(), rs1=r(), imm=rng.randint(-50, 50)))
        elif kind == "mul":
            words.append(enc("mul", desc, rd=r(), rs1=r(), rs2=r()))
        elif kind == "lui":
            words.append(enc("lui", desc, rd=r(), imm=rng.randrange(0, 0x8000) << 16))
        elif kind == "nop" or (kind == "mem" and not memory_ops):
            words.append(0)
        elif kind == "mem":
            mn = rng.choice(("ld", "st"))
            if rng.random() < 0.5:
                imm = rng.choice((0x1000 + 4 * rng.randrange(64), -0x1000 + 4 * rng.randrange(8)))
                words.append(enc(mn, desc, rd=r(), rs1=0, imm=imm))
            else:
                words.append(enc(mn, desc, rd=r(), rs1=r(), imm=4 * rng.randint(-4, 4)))
        elif kind == "br":
            t = rng.randrange(n)
            words.append(enc(rng.choice(("beq", "bne", "blt")), desc, rd=r(), rs1=r(), imm=t - k - 1))
        elif kind in ("j", "jal"):
            t = rng.randrange(n)
            words.append(enc(kind, desc, imm=t - k - 1))
        elif kind == "jr":
            words.append(enc("jr", desc, rs1=r()))
        else:
            words.append(enc("halt", desc))
    return words


STRAIGHT_KINDS = ("alu", "alui", "mul", "lui", "nop", "ld", "st")


def random_straight_block(rng, n, desc=None):
    """Straight-line body of ``n`` instructions (plus HALT) that stays one block.

    Memory accesses use r0 + a RAM offset so the base is always known.
    """
    desc = desc or default_description()
    r = lambda: rng.randrange(16)
    words = []
    for _ in range(n):
        kind = rng.choice(STRAIGHT_KINDS)
        if kind == "alu":
            words.append(enc(rng.choice(ALU_R), desc, rd=r(), rs1=r(), rs2=r()))
        elif kind == "alui":
            words.append(enc("addi", desc, rd=r(), rs1=r(), imm=rng.randint(-9, 9)))
        elif kind == "mul":
            words.append(enc("mul", desc, rd=r(), rs1=r(), rs2=r()))
        elif kind == "lui":
            words.append(enc("lui", desc, rd=r(), imm=rng.randrange(0x100) << 16))
        elif kind == "nop":
            words.append(0)
        else:
            words.append(enc(kind, desc, rd=r(), rs1=0, imm=0x1000 + 4 * rng.randrange(256)))
    words.append(enc("halt", desc))
    return words


def hand_program(ops, memory_map=RAM, bus_map=BusMap(), level=DetailLevel.L1_static, cache=None):
    """One-block translated program from a list of (name, *args) tuples."""
    block = TranslatedBlock(0, 0, 4, tuple(TargetOp(o[0], tuple(o[1:])) for o in ops))
    return TranslatedProgram(
        blocks=(block,), level=level, variant=BLOCK_ORIENTED, entry_block=0,
        addr_map={0: 0}, memory_map=memory_map, bus_map=bus_map, cache=cache,
    )


def seeded(seed):
    return random.Random(seed)
