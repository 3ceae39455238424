import pytest

from cabt import corpus
from cabt.errors import DuplicateDevice, OpLimitExceeded, SyncProtocolViolation, UnknownDevice
from cabt.image import BusMap, IORegion
from cabt.oracle import OracleConfig, reference_run
from cabt.pipeline import translate
from cabt.report import default_devices
from cabt.vtm import (
    CounterDevice, DeviceRegistry, Machine, NullDevice, UartDevice, register_device, vm_run,
)

from progen import hand_program

UART_BUS = BusMap((IORegion(0xF000, 0xF100, "uart"),))


def test_sync_start_wait():
    res = vm_run(hand_program([("SYNC_START", 5), ("SYNC_WAIT",), ("HALT_T",)]))
    assert res.hwclock == 5


def test_correction_ledger_breakdown():
    res = vm_run(hand_program([
        ("SYNC_START", 3), ("CORR_ADD", 4), ("SYNC_WAIT",), ("CORR_FLUSH",), ("HALT_T",),
    ]))
    assert res.hwclock == 7
    assert res.breakdown == (3, 4, 0)


def test_double_sync_start_is_violation():
    with pytest.raises(SyncProtocolViolation):
        vm_run(hand_program([("SYNC_START", 3), ("SYNC_START", 2), ("HALT_T",)]))


def test_bus_during_generation_is_violation():
    devs = DeviceRegistry()
    devs.register("uart", NullDevice())
    prog = hand_program([("SYNC_START", 3), ("BUS_WR", "uart", 0, 1), ("SYNC_WAIT",), ("HALT_T",)],
                        bus_map=UART_BUS)
    with pytest.raises(SyncProtocolViolation):
        vm_run(prog, devs)


def test_unknown_device():
    prog = hand_program([("BUS_RD", "disk", 0, 1), ("HALT_T",)])
    with pytest.raises(UnknownDevice):
        vm_run(prog)


def test_duplicate_device():
    devs = DeviceRegistry()
    register_device(devs, "a", NullDevice())
    with pytest.raises(DuplicateDevice):
        register_device(devs, "a", NullDevice())


def test_null_and_counter_devices():
    devs = DeviceRegistry()
    devs.register("n", NullDevice())
    devs.register("c", CounterDevice())
    prog = hand_program([
        ("MOVI", 1, 9), ("BUS_WR", "n", 0, 1), ("BUS_RD", "n", 0, 2),
        ("BUS_RD", "c", 0, 3), ("BUS_WR", "c", 0, 1), ("BUS_RD", "c", 0, 4), ("HALT_T",),
    ])
    res = vm_run(prog, devs)
    assert res.registers[2] == 0
    assert (res.registers[3], res.registers[4]) == (0, 2)
    assert len(res.bus_trace) == 5


def test_uart_echo_output(desc):
    img = corpus.load_program("uart_echo")
    devs = default_devices(img, {"uart": ("uart", corpus.UART_INPUT.decode())})
    vm_run(translate(img, desc, 2), devs)
    assert devs["uart"].output == corpus.UART_OUTPUT


def test_op_limit():
    from cabt.codegen import TargetOp, TranslatedBlock, TranslatedProgram
    loop = TranslatedBlock(0, 0, 4, (TargetOp("SYNC_START", (1,)), TargetOp("SYNC_WAIT"), TargetOp("JMP", (0,))))
    prog = hand_program([("HALT_T",)])
    prog = TranslatedProgram((loop,), prog.level, prog.variant, 0, {0: 0}, prog.memory_map, prog.bus_map)
    with pytest.raises(OpLimitExceeded):
        vm_run(prog, max_ops=1000)


def test_gcd_l3_matches_oracle(desc):
    img = corpus.load_program("gcd")
    assert vm_run(translate(img, desc, 3)).hwclock == reference_run(img, desc, OracleConfig.for_level(3)).hwclock


@pytest.mark.parametrize("name", corpus.ALL_PROGRAMS)
def test_clock_monotonic_and_deterministic(desc, name):
    img = corpus.load_program(name)
    prog = translate(img, desc, 3)
    a = vm_run(prog, default_devices(img), record_clock=True)
    b = vm_run(prog, default_devices(img), record_clock=True)
    assert a == b
    assert all(x <= y for x, y in zip(a.clock_trace, a.clock_trace[1:]))
    stamps = [e.hwclock for e in a.bus_trace]
    assert stamps == sorted(stamps)


def test_gcd_results(desc):
    img = corpus.load_program("gcd")
    m = Machine(translate(img, desc, 1))
    m.run()
    base = img.symbols["results"]
    got = [m.mem.read32(base + 0x100000 + 4 * k) for k in range(5)]
    assert got == [21, 252, 6, 1, 2048]


def test_uart_device_status_counts_remaining():
    u = UartDevice(b"ab")
    assert u.read(0, 4) == 2
    assert u.read(0, 0) == ord("a")
    assert u.read(0, 4) == 1
