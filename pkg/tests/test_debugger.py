import io

import pytest

from cabt import corpus
from cabt.asm import assemble
from cabt.debugger import DebugSession, handle_command, serve
from cabt.errors import AddressOutOfRange, AlreadyHalted
from cabt.pipeline import translate
from cabt.vtm import vm_run

LOOP = """
.entry start
.memmap 0x0 0x4000 0x20000 RAM
.text 0x0
start:  li   r1, 7
        li   r2, 3
        add  r3, r1, r2
        nop
loop:   addi r2, r2, -1
        bne  r2, r0, loop
        st   r3, [r0+0x1000]
        halt
dead:   nop
        halt
"""


@pytest.fixture
def session(desc):
    return DebugSession(assemble(LOOP), desc, 2)


def test_breakpoint_at_leader_kept(session):
    assert session.set_breakpoint(0x10) == 0x10


def test_mid_block_breakpoint(session):
    assert session.set_breakpoint(0x8) == 0x0
    assert session.step_to == {0x0: {0x8}}
    assert session.cont() == ("breakpoint", 0x8)
    assert session.registers()[1] == 7 and session.registers()[3] == 0


def test_breakpoint_outside_image(session):
    with pytest.raises(AddressOutOfRange):
        session.set_breakpoint(0x4000)


def test_no_breakpoints_matches_plain_run(session, desc):
    assert session.cont() == ("halted", None)
    assert session.vm.hwclock == vm_run(translate(assemble(LOOP), desc, 2)).hwclock


def test_breakpoint_at_entry_stops_first(session):
    session.set_breakpoint(0x0)
    assert session.cont() == ("breakpoint", 0x0)
    assert session.vm.hwclock == 0


def test_dead_code_breakpoint_runs_to_halt(session):
    session.set_breakpoint(0x20)
    assert session.cont() == ("halted", None)


def test_step_nop_costs_one(session):
    for _ in range(3):
        session.step()
    before = session.vm.hwclock
    assert session.step() == 0x10
    assert session.vm.hwclock - before == 1


def test_step_taken_forward_beq_costs_five(desc):
    s = DebugSession(assemble(".text 0x0\nbeq r0, r0, out\nnop\nout: halt\n"), desc, 2)
    assert s.step() == 0x8
    assert s.vm.hwclock == 5


def test_step_at_halt(session):
    session.cont()
    with pytest.raises(AlreadyHalted):
        session.step()


def test_registers_after_li(session):
    session.step()
    assert session.inspect("regs")[1] == 7


def test_mem_read_through_remap(session):
    session.cont()
    assert session.inspect("mem", 0x1000, 4) == (10).to_bytes(4, "little")
    assert session.vm.mem.read32(0x21000) == 10


def test_cycles_inspect(session):
    session.step()
    assert session.inspect("cycles") == session.vm.hwclock == 1


def test_protocol_round(session):
    script = "b 0x10\nc\nregs\ncycles\ns\nmem 0x1000 4\nbogus\nc\nq\nc\n"
    out = io.StringIO()
    serve(session, io.StringIO(script), out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "breakpoint 0x10 leader 0x10"
    assert lines[1] == "stopped breakpoint 0x10"
    assert lines[2].startswith("r0=00000000 r1=00000007 r2=00000003 r3=0000000a")
    assert lines[3].startswith("cycles ")
    assert lines[4] == "stopped 0x14"
    assert lines[5] == "mem 0x1000 00000000"
    assert lines[6].startswith("error")
    assert lines[7] == "stopped breakpoint 0x10"
    assert lines[8] == "bye"
    assert len(lines) == 9


def test_bad_address_reply(session):
    reply, more = handle_command(session, "b 0x9000")
    assert reply.startswith("error") and more


def test_bundled_program_under_debugger(desc):
    img = corpus.load_program("dpcm")
    s = DebugSession(img, desc, 3)
    for _ in range(25):
        s.step()
    while s.cont()[0] != "halted":
        pass
    plain = vm_run(translate(img, desc, 3))
    assert s.vm.result().registers == plain.registers
