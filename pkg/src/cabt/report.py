"""Accuracy and speed comparison across detail levels."""

import csv
import io
from dataclasses import dataclass

from cabt.codegen import DetailLevel
from cabt.oracle import OracleConfig, reference_run
from cabt.pipeline import analyze, translate
from cabt.vtm import DEFAULT_MAX_OPS, DEVICE_KINDS, DeviceRegistry, make_device, vm_run

COLUMNS = [
    "program", "instr_count", "oracle_cycles",
    "l1_cycles", "l1_dev", "l2_cycles", "l2_dev", "l3_cycles", "l3_dev",
    "l1_hostops", "l2_hostops", "l3_hostops",
    "flush_oracle_cycles", "l3_flush_dev",
]

LEVELS = (DetailLevel.L1_static, DetailLevel.L2_branch, DetailLevel.L3_branch_icache)


def default_devices(image, overrides=None):
    """Fresh devices for every I/O region of ``image``.

    A region whose device name is a known kind gets that kind, anything
    else a null device.  ``overrides`` maps names to ``(kind, arg)``.
    """
    overrides = overrides or {}
    reg = DeviceRegistry()
    for r in image.bus_map.io_regions:
        if r.device in reg:
            continue
        kind, arg = overrides.get(r.device, (r.device if r.device in DEVICE_KINDS else "null", None))
        reg.register(r.device, make_device(kind, arg))
    for name, (kind, arg) in overrides.items():
        if name not in reg:
            reg.register(name, make_device(kind, arg))
    return reg


@dataclass
class ProgramReport:
    program: str
    instr_count: int
    oracle_cycles: int
    cycles: dict
    hostops: dict
    flush_oracle_cycles: int

    def dev(self, level):
        return abs(self.cycles[level] - self.oracle_cycles) / self.oracle_cycles

    @property
    def l3_flush_dev(self):
        l3 = self.cycles[DetailLevel.L3_branch_icache]
        return abs(l3 - self.flush_oracle_cycles) / self.flush_oracle_cycles

    def hostops_per_instr(self, level):
        return self.hostops[level] / self.instr_count

    def row(self):
        r = {"program": self.program, "instr_count": self.instr_count,
             "oracle_cycles": self.oracle_cycles}
        for lv in LEVELS:
            r[f"l{int(lv)}_cycles"] = self.cycles[lv]
            r[f"l{int(lv)}_dev"] = f"{self.dev(lv):.6f}"
        for lv in LEVELS:
            r[f"l{int(lv)}_hostops"] = self.hostops[lv]
        r["flush_oracle_cycles"] = self.flush_oracle_cycles
        r["l3_flush_dev"] = f"{self.l3_flush_dev:.6f}"
        return r


def compare_program(name, image, desc, max_ops=DEFAULT_MAX_OPS, devices=None) -> ProgramReport:
    new_devices = devices or (lambda: default_devices(image))
    analysis = analyze(image, desc)
    cont = reference_run(image, desc, OracleConfig.full_continuous(), new_devices(), max_ops)
    flush = reference_run(image, desc, OracleConfig.for_level(3), new_devices(), max_ops,
                          leaders=analysis.leaders)
    cycles, hostops = {}, {}
    for lv in LEVELS:
        res = vm_run(translate(image, desc, lv, analysis=analysis), new_devices(), max_ops)
        cycles[lv] = res.hwclock
        hostops[lv] = res.host_ops
    return ProgramReport(name, cont.src_instructions, cont.hwclock, cycles, hostops, flush.hwclock)


def compare(programs, desc, max_ops=DEFAULT_MAX_OPS):
    """``programs`` is a sequence of (name, image) pairs."""
    return [compare_program(name, image, desc, max_ops) for name, image in programs]


def to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()
