"""Tiny two-pass TK32 assembler and disassembler.

Development tooling for building the bundled test programs; not part of
the translation pipeline.  Syntax::

    .entry main                 ; entry symbol or address
    .memmap 0x0 0x10000 0x100000 RAM
    .io 0xf000 0xf100 uart
    .text 0x0                   ; start section ".text" at base 0x0
    .data 0x2000                ; start section ".data"
    .equ N 10
    main:   li   r1, 0x12345    ; pseudo: addi or lui+addi
            la   r2, table      ; pseudo: always lui+addi
            ld   r3, [r2+4]
            beq  r3, r0, done
            jal  func
    done:   halt
    table:  .word 1, 2, 3
            .space 16
"""

import re

from cabt.errors import InputError
from cabt.image import (
    BusMap, IORegion, MemoryMap, MemRegion, ProgramImage, Section, _validate,
)
from cabt.procdesc import default_description, encode, lookup_decode


class AsmError(InputError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


_MEM_RE = re.compile(r"^\[\s*(r\d+)\s*(?:([+-])\s*(\S+?))?\s*\]$", re.I)


def _sext16(v):
    v &= 0xFFFF
    return v - 0x10000 if v & 0x8000 else v


def split_const(value):
    """Split a 32-bit constant into (lui field, addi immediate)."""
    v = value & 0xFFFFFFFF
    lo = _sext16(v)
    hi = ((v - lo) >> 16) & 0xFFFF
    return hi, lo


class _Section:
    def __init__(self, name, base, exec_):
        self.name, self.base, self.exec = name, base, exec_
        self.items = []  # (addr, lineno, mnemonic, args, size)
        self.size = 0


class Assembler:
    def __init__(self, desc=None):
        self.desc = desc or default_description()
        self.symbols = {}
        self.labels = set()
        self.sections = []
        self.entry = None
        self.mem_regions = []
        self.io_regions = []

    def _value(self, tok, lineno, *, allow_undefined=False):
        tok = tok.strip()
        m = re.match(r"^([A-Za-z_.][\w.]*)\s*([+-])\s*(.+)$", tok)
        if m:
            base = self._value(m.group(1), lineno, allow_undefined=allow_undefined)
            off = self._value(m.group(3), lineno)
            return None if base is None else base + (off if m.group(2) == "+" else -off)
        try:
            return int(tok, 0)
        except ValueError:
            pass
        if tok in self.symbols:
            return self.symbols[tok]
        if allow_undefined:
            return None
        raise AsmError(lineno, f"undefined symbol {tok!r}")

    @staticmethod
    def _reg(tok, lineno):
        tok = tok.strip().lower()
        if not re.fullmatch(r"r\d+", tok) or int(tok[1:]) >= 16:
            raise AsmError(lineno, f"bad register {tok!r}")
        return int(tok[1:])

    def _size(self, mnem, args, lineno):
        if mnem == "li":
            v = self._value(args[1], lineno, allow_undefined=True)
            if v is None:
                return 8
            if -0x8000 <= v < 0x8000:
                return 4
            return 4 if split_const(v)[1] == 0 else 8
        if mnem == "la":
            return 8
        return 4

    def assemble(self, text):
        lines = []
        for n, raw in enumerate(text.splitlines(), 1):
            line = re.split(r"[;#]", raw, maxsplit=1)[0].strip()
            while True:
                m = re.match(r"^([A-Za-z_.][\w.]*):\s*(.*)$", line)
                if not m:
                    break
                lines.append((n, "label", m.group(1)))
                line = m.group(2)
            if line:
                lines.append((n, "stmt", line))

        # pass 1: layout
        cur = None
        for n, kind, body in lines:
            if kind == "label":
                if cur is None:
                    raise AsmError(n, "label outside a section")
                if body in self.symbols:
                    raise AsmError(n, f"duplicate symbol {body!r}")
                self.symbols[body] = cur.base + cur.size
                self.labels.add(body)
                continue
            mnem, _, rest = body.partition(" ")
            mnem = mnem.lower()
            if not rest.strip():
                args = []
            elif mnem.startswith("."):
                args = re.split(r"[\s,]+", rest.strip())
            else:
                args = [a.strip() for a in _split_args(rest)]
            if mnem in (".text", ".data", ".section"):
                if mnem == ".section":
                    name, base = args[0], self._value(args[1], n)
                    exec_ = len(args) > 2 and args[2] == "exec"
                else:
                    name, base = mnem, self._value(args[0], n) if args else 0
                    exec_ = mnem == ".text"
                cur = _Section(name, base, exec_)
                self.sections.append(cur)
            elif mnem == ".equ":
                self.symbols[args[0]] = self._value(args[1], n)
            elif mnem == ".entry":
                self.entry = (args[0], n)
            elif mnem == ".memmap":
                self.mem_regions.append((args, n))
            elif mnem == ".io":
                self.io_regions.append((args, n))
            else:
                if cur is None:
                    raise AsmError(n, "statement outside a section")
                if mnem == ".word":
                    size = 4 * len(args)
                elif mnem == ".space":
                    size = self._value(args[0], n)
                    if size % 4:
                        raise AsmError(n, ".space must be a multiple of 4")
                else:
                    size = self._size(mnem, args, n)
                cur.items.append((cur.base + cur.size, n, mnem, args, size))
                cur.size += size

        # pass 2: encode
        sections = []
        for sec in self.sections:
            out = bytearray()
            for addr, n, mnem, args, size in sec.items:
                if mnem == ".word":
                    for a in args:
                        out += (self._value(a, n) & 0xFFFFFFFF).to_bytes(4, "little")
                elif mnem == ".space":
                    out += bytes(self._value(args[0], n))
                else:
                    for w in self._encode(addr, mnem, args, n, size):
                        out += w.to_bytes(4, "little")
            sections.append(Section(sec.name, sec.base, bytes(out), sec.exec))

        if self.entry is None:
            entry = next(s.base for s in sections if s.exec)
        else:
            entry = self._value(*self.entry)
        kwargs = {}
        if self.mem_regions:
            kwargs["memory_map"] = MemoryMap(tuple(
                MemRegion(self._value(a[0], n), self._value(a[1], n), self._value(a[2], n),
                          a[3].upper() if len(a) > 3 else "RAM")
                for a, n in self.mem_regions
            ))
        if self.io_regions:
            kwargs["bus_map"] = BusMap(tuple(
                IORegion(self._value(a[0], n), self._value(a[1], n), a[2]) for a, n in self.io_regions
            ))
        symbols = {k: v for k, v in self.symbols.items() if k in self.labels}
        image = ProgramImage(entry=entry, sections=tuple(sections), symbols=symbols, **kwargs)
        _validate(image)
        return image

    def _enc(self, mnem, **kw):
        return encode(self.desc.by_mnemonic(mnem), **kw)

    def _encode(self, addr, mnem, args, n, size=4):
        def reg(i):
            return self._reg(args[i], n)

        def need(k):
            if len(args) != k:
                raise AsmError(n, f"{mnem} takes {k} operands")

        try:
            if mnem == "li" or mnem == "la":
                need(2)
                rd = reg(0)
                v = self._value(args[1], n)
                if size == 4 and -0x8000 <= v < 0x8000:
                    return [self._enc("ADDI", rd=rd, rs1=0, imm=v)]
                hi, lo = split_const(v)
                words = [self._enc("LUI", rd=rd, imm=_sext16(hi) << 16)]
                if size == 8:
                    words.append(self._enc("ADDI", rd=rd, rs1=rd, imm=lo))
                return words
            if mnem == "mov":
                need(2)
                return [self._enc("ADD", rd=reg(0), rs1=reg(1), rs2=0)]
            idef = self.desc.by_mnemonic(mnem)
        except KeyError:
            raise AsmError(n, f"unknown mnemonic {mnem!r}") from None
        try:
            fam = idef.family
            if fam in ("nop", "halt"):
                need(0)
                return [encode(idef)]
            if fam == "alu" and idef.format == "R":
                need(3)
                return [encode(idef, rd=reg(0), rs1=reg(1), rs2=reg(2))]
            if fam == "alu":
                need(3)
                return [encode(idef, rd=reg(0), rs1=reg(1), imm=self._value(args[2], n))]
            if fam == "movi":
                need(2)
                return [encode(idef, rd=reg(0), imm=_sext16(self._value(args[1], n)) << idef.imm_shift)]
            if fam in ("load", "store"):
                need(2)
                m = _MEM_RE.match(args[1])
                if not m:
                    raise AsmError(n, f"bad memory operand {args[1]!r}")
                off = self._value(m.group(3), n) if m.group(3) else 0
                if m.group(2) == "-":
                    off = -off
                return [encode(idef, rd=reg(0), rs1=self._reg(m.group(1), n), imm=off)]
            if fam == "branch":
                need(3)
                target = self._value(args[2], n)
                return [encode(idef, rd=reg(0), rs1=reg(1), imm=_rel(target, addr, n))]
            if fam in ("jump", "call"):
                need(1)
                return [encode(idef, imm=_rel(self._value(args[0], n), addr, n))]
            if fam == "jump_reg":
                need(1)
                return [encode(idef, rs1=reg(0))]
        except ValueError as e:
            raise AsmError(n, str(e)) from None
        raise AsmError(n, f"cannot assemble {mnem!r}")


def _rel(target, addr, n):
    delta = target - (addr + 4)
    if delta % 4:
        raise AsmError(n, f"misaligned target {target:#x}")
    return delta // 4


def _split_args(rest):
    out, depth, cur = [], 0, ""
    for ch in rest:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def assemble(text, desc=None) -> ProgramImage:
    return Assembler(desc).assemble(text)


def disassemble_word(desc, word, addr):
    d = lookup_decode(desc, word, addr)
    i = d.idef
    m = i.mnemonic.lower()
    fam = i.family
    if fam in ("nop", "halt"):
        return m
    if fam == "alu" and i.format == "R":
        return f"{m} r{d.rd}, r{d.rs1}, r{d.rs2}"
    if fam == "alu":
        return f"{m} r{d.rd}, r{d.rs1}, {d.imm}"
    if fam == "movi":
        return f"{m} r{d.rd}, {(d.imm >> i.imm_shift) & 0xFFFF:#x}"
    if fam in ("load", "store"):
        sign = "-" if d.imm < 0 else "+"
        return f"{m} r{d.rd}, [r{d.rs1}{sign}{abs(d.imm)}]"
    if fam == "branch":
        return f"{m} r{d.rd}, r{d.rs1}, {addr + 4 + 4 * d.imm:#x}"
    if fam in ("jump", "call"):
        return f"{m} {addr + 4 + 4 * d.imm:#x}"
    return f"{m} r{d.rs1}"


def disassemble(image: ProgramImage, desc=None) -> str:
    """Listing of every section; re-assembles to the same bytes."""
    desc = desc or default_description()
    out = [f".entry {image.entry:#x}"]
    for r in image.memory_map.regions:
        out.append(f".memmap {r.src_base:#x} {r.src_end:#x} {r.dst_base:#x} {r.kind}")
    for r in image.bus_map.io_regions:
        out.append(f".io {r.base:#x} {r.end:#x} {r.device}")
    for s in image.sections:
        out.append(f".section {s.name} {s.base:#x}" + (" exec" if s.exec else ""))
        for addr, word in image.words(s):
            if s.exec:
                text = disassemble_word(desc, word, addr)
            else:
                text = f".word {word:#x}"
            out.append(f"    {text:<28}; {addr:08x}: {word:08x}")
    return "\n".join(out) + "\n"
