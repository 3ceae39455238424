"""Command-line entry point: ``cabt <subcommand> ...``.

Exit codes: 0 ok, 1 usage, 2 input error, 3 runtime error.
"""

import argparse
import csv
import pathlib
import sys

from cabt import corpus
from cabt.asm import assemble
from cabt.cachemodel import dump_cabs
from cabt.codegen import BLOCK_ORIENTED, INSTRUCTION_ORIENTED, program_from_json, program_to_json
from cabt.debugger import DebugSession, serve
from cabt.errors import CabtError, InputError, RunError
from cabt.frontend import dump_cfg
from cabt.image import ProgramImage, load_image
from cabt.oracle import OracleConfig, reference_run
from cabt.pipeline import analyze, translate
from cabt.procdesc import default_description, load_description
from cabt.report import compare, default_devices, to_csv
from cabt.timing import dump_timing
from cabt.vtm import DEFAULT_MAX_OPS, vm_run

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

VARIANTS = {"block": BLOCK_ORIENTED, "instruction": INSTRUCTION_ORIENTED}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path):
    try:
        return pathlib.Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def load_image_arg(arg):
    """An image manifest, an assembly source, or the name of a bundled program."""
    p = pathlib.Path(arg)
    if not p.exists() and arg in corpus.ALL_PROGRAMS:
        return arg, corpus.load_program(arg)
    text = _read(arg)
    if p.suffix == ".asm":
        return p.stem, assemble(text)
    return p.stem, load_image(text)


def load_desc_arg(path):
    return default_description() if path is None else load_description(_read(path))


def parse_devices(specs):
    """``name=kind[:arg]`` entries -> {name: (kind, arg)}."""
    out = {}
    for spec in specs or ():
        name, sep, kind = spec.partition("=")
        if not sep or not name or not kind:
            raise InputError(f"bad --device {spec!r}, expected name=kind[:arg]")
        kind, _, arg = kind.partition(":")
        out[name] = (kind, arg or None)
    return out


def write_trace(path, trace):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["hwclock", "device", "offset", "rw", "value"])
        for e in trace:
            w.writerow([e.hwclock, e.device, e.offset, e.rw, e.value])


def _print_result(res, devices, out):
    print(f"hwclock={res.hwclock}", file=out)
    print(f"host_ops={res.host_ops}", file=out)
    print(f"instructions={res.src_instructions}", file=out)
    print(
        f"static_cycles={res.static_cycles_sum} branch_correction={res.branch_correction_sum} "
        f"cache_correction={res.cache_correction_sum}",
        file=out,
    )
    print(" ".join(f"r{i}={v:08x}" for i, v in enumerate(res.registers)), file=out)
    print(f"memory_digest={res.memory_digest}", file=out)
    print(f"bus_transactions={len(res.bus_trace)}", file=out)
    for name in devices.names():
        dev = devices[name]
        if hasattr(dev, "output") and dev.output:
            print(f"{name}_output={dev.output!r}", file=out)


def cmd_translate(args, out):
    _, image = load_image_arg(args.image)
    desc = load_desc_arg(args.desc)
    if args.dump_cfg or args.dump_timing or args.dump_cabs:
        analysis = analyze(image, desc)
        if args.dump_cfg:
            out.write(dump_cfg(analysis.blocks))
        if args.dump_timing:
            out.write(dump_timing(analysis.timings))
        if args.dump_cabs:
            if desc.icache is None:
                raise InputError("--dump-cabs needs an icache in the description")
            out.write(dump_cabs(b.cabs for b in analysis.blocks))
    prog = translate(image, desc, args.level, VARIANTS[args.variant])
    text = program_to_json(prog)
    if args.output:
        pathlib.Path(args.output).write_text(text)
    elif not (args.dump_cfg or args.dump_timing or args.dump_cabs):
        out.write(text)
    return EXIT_OK


def cmd_run(args, out):
    desc = load_desc_arg(args.desc)
    overrides = parse_devices(args.device)
    if args.translated:
        prog = program_from_json(_read(args.translated))
        image = None
    else:
        _, image = load_image_arg(args.image)
        prog = translate(image, desc, args.level, VARIANTS[args.variant])
    if image is None:
        # a translated artifact carries only the maps; devices come from its bus map
        image = ProgramImage(0, (), bus_map=prog.bus_map)
    devices = default_devices(image, overrides)
    res = vm_run(prog, devices, args.max_ops)
    if args.trace_out:
        write_trace(args.trace_out, res.bus_trace)
    _print_result(res, devices, out)
    return EXIT_OK


def cmd_oracle(args, out):
    _, image = load_image_arg(args.image)
    desc = load_desc_arg(args.desc)
    cfg = OracleConfig(
        block_flush=not args.continuous,
        continuous=args.continuous,
        model_branch=args.branch == "on",
        model_icache=args.icache == "on",
    )
    devices = default_devices(image, parse_devices(args.device))
    res = reference_run(image, desc, cfg, devices, args.max_ops)
    if args.trace_out:
        write_trace(args.trace_out, res.bus_trace)
    _print_result(res, devices, out)
    return EXIT_OK


def cmd_compare(args, out):
    desc = load_desc_arg(args.desc)
    names = args.images or list(corpus.PROGRAMS)
    programs = [load_image_arg(n) for n in names]
    text = to_csv(compare(programs, desc, args.max_ops))
    if args.output:
        pathlib.Path(args.output).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_debug(args, out):
    _, image = load_image_arg(args.image)
    desc = load_desc_arg(args.desc)
    devices = default_devices(image, parse_devices(args.device))
    session = DebugSession(image, desc, args.level, devices, args.max_ops)
    serve(session, sys.stdin, out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="cabt", description="Cycle-accurate static binary translator for TK32.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, image=True):
        if image:
            sp.add_argument("image", help="image (.img), assembly (.asm) or bundled program name")
        sp.add_argument("--desc", help="processor description JSON (default: bundled TK32)")
        sp.add_argument("--max-ops", type=int, default=DEFAULT_MAX_OPS)

    def level(sp):
        sp.add_argument("--level", type=int, choices=(1, 2, 3), default=1)

    def devices(sp):
        sp.add_argument("--device", action="append", metavar="NAME=KIND[:ARG]",
                        help="device kinds: null, counter, uart (ARG = receive text)")

    t = sub.add_parser("translate", help="translate an image to a VTM program")
    common(t)
    level(t)
    t.add_argument("--variant", choices=sorted(VARIANTS), default="block")
    t.add_argument("-o", "--output")
    t.add_argument("--dump-cfg", action="store_true")
    t.add_argument("--dump-timing", action="store_true")
    t.add_argument("--dump-cabs", action="store_true")
    t.set_defaults(func=cmd_translate)

    r = sub.add_parser("run", help="translate (or load) and execute on the VTM")
    common(r, image=False)
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--image")
    src.add_argument("--translated")
    level(r)
    r.add_argument("--variant", choices=sorted(VARIANTS), default="block")
    devices(r)
    r.add_argument("--trace-out")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="run the interpretive reference simulator")
    common(o)
    mode = o.add_mutually_exclusive_group()
    mode.add_argument("--flush", action="store_true", default=True)
    mode.add_argument("--continuous", action="store_true")
    o.add_argument("--branch", choices=("on", "off"), default="on")
    o.add_argument("--icache", choices=("on", "off"), default="on")
    devices(o)
    o.add_argument("--trace-out")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("compare", help="accuracy/speed report across detail levels (CSV)")
    c.add_argument("images", nargs="*", help="default: the six bundled programs")
    c.add_argument("--desc")
    c.add_argument("--max-ops", type=int, default=DEFAULT_MAX_OPS)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("debug", help="debug server speaking the line protocol on stdin/stdout")
    common(d)
    level(d)
    devices(d)
    d.set_defaults(func=cmd_debug)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as e:
        print(f"cabt: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (RunError, CabtError) as e:
        print(f"cabt: runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
