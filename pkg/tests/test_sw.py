import itertools

import pytest

from vfab.demo.harness import UsageError, run_test
from vfab.seq import Range
from vfab.sw import (
    BUSY, DONE, ERROR, IDLE, NUM_ARGS, STATUS_EDGES, Mailbox, ProgramError, VriCommandTable, VriError,
    apply_op, mailbox_traces, parse_program, program, register_vri_handler, vri_register_defs,
)

OPS = ("ring_ok", "ring_bad", "complete_ok", "complete_err", "read_ret")


def reference_step(status, running, op):
    """Mailbox state graph written out as a table, independent of Mailbox."""
    if op in ("ring_ok", "ring_bad"):
        if status == BUSY:
            return ERROR, running
        if status == IDLE:
            return (BUSY, True) if op == "ring_ok" else (ERROR, running)
        return status, running
    if op in ("complete_ok", "complete_err"):
        if not running:
            return status, running
        if status == BUSY:
            return (DONE if op == "complete_ok" else ERROR), False
        return status, False
    if op == "read_ret":
        if status in (DONE, ERROR) and not running:
            return IDLE, running
        return status, running
    raise AssertionError(op)


def all_traces(max_len):
    for n in range(max_len + 1):
        yield from mailbox_traces(n)


def test_mailbox_exhaustive_against_state_graph():
    count = 0
    for trace in all_traces(6):
        box = Mailbox()
        status, running = IDLE, False
        for op in trace:
            before = box.status
            apply_op(box, op)
            status, running = reference_step(status, running, op)
            assert (box.status, box.running) == (status, running), trace
            if box.status != before:
                assert (before, box.status) in STATUS_EDGES, trace
        assert all(e in STATUS_EDGES for e in zip(box.history, box.history[1:]))
        count += 1
    assert count == sum(len(OPS) ** n for n in range(7))


def test_mailbox_traces_enumerates_all_ops():
    assert set(itertools.chain.from_iterable(mailbox_traces(1))) == set(OPS)
    with pytest.raises(ValueError):
        apply_op(Mailbox(), "nope")


def test_busy_doorbell_errors_but_command_keeps_running():
    box = Mailbox()
    assert box.ring(True) is True
    assert box.ring(True) is False and box.status == ERROR and box.running
    box.complete(True, 7)
    assert box.status == ERROR and not box.running and box.ret == 7
    assert box.read_ret() == 7 and box.status == IDLE


def test_register_vri_handler_rules():
    t = VriCommandTable()
    cmd = register_vri_handler(t, 1, lambda: None, [(0, 3)], "ONE")
    assert t.by_name("ONE") is cmd and t.names() == {"ONE": 1} and 1 in t
    assert cmd.check_args([2]) is None
    assert "outside [0..3]" in cmd.check_args([4])
    with pytest.raises(VriError, match="already registered"):
        register_vri_handler(t, 1, lambda: None)
    with pytest.raises(VriError, match="at most"):
        register_vri_handler(t, 2, lambda: None, [Range(0, 1)] * (NUM_ARGS + 1))
    with pytest.raises(VriError):
        register_vri_handler(t, 1 << 32, lambda: None)


def test_vri_register_layout():
    defs = {d.name: d for d in vri_register_defs()}
    assert [defs[n].offset for n in ("DOORBELL", "CMD", "STATUS", "RET", "ARG0", "ARG7")] == [0, 4, 8, 12, 16, 44]
    assert defs["STATUS"].fields[0].access == "RO" and defs["DOORBELL"].fields[0].access == "WO"


def test_parse_program():
    prog = parse_program("""
        # comment
        w ganc.GAIN 0x20   # trailing
        r ganc.GAIN 0x20
        vri SEND_FRAME 16 16 ramp 7
        irqwait 0 400
        set x 5
        wait 3
    """, "p")
    assert [s.op for s in prog.body] == ["w", "r", "vri", "irqwait", "set", "wait"]
    assert prog.body[0].line == 3 and len(prog) == 6
    with pytest.raises(ProgramError, match="p:1: unknown statement 'jump'"):
        parse_program("jump 4", "p")
    with pytest.raises(ProgramError, match="takes 2..2"):
        parse_program("w ganc.GAIN", "p")
    with pytest.raises(ProgramError):
        parse_program('w "unterminated', "p")
    assert len(program("q", "w a 1", "r a")) == 2


def soc_program(text, seed=1):
    out = run_test("program", "soc", seed, options={"program": text})
    return out, out.extras["program_result"]


@pytest.mark.parametrize("text,code", [
    ("r ganc.GAIN 0x99", "sw_check"),
    ("w 0x70000000 1", "sw_bus_error"),
    ("irqwait 0 50", "sw_irq_timeout"),
    ("irqwait 7 50", "sw_program"),
    ("w ganc.NOPE 1", "sw_program"),
    ("w ganc.GAIN banana", "sw_program"),
    ("vri 99", "sw_vri_error"),
    ("vri SEND_FRAME 0 0 ramp 1", "sw_vri_error"),
])
def test_core_program_failures_are_named(text, code):
    out, res = soc_program(text)
    assert res.status == 1 and out.result.codes() == [code]


def test_core_program_register_access_and_vri_echo():
    out, res = soc_program("w ganc.GAIN 0x33\nr ganc.GAIN 0x33\nset v 9\nvri ECHO v\nr 0x5000000C 9")
    assert out.passed and res.status == 0
    assert res.reads == [("ganc.GAIN", 0x33), ("0x5000000C", 9)]
    assert res.vri == [(2, DONE, 9)]


def test_rejected_vri_call_is_counted():
    out, res = soc_program("vri SEND_FRAME 0 0 ramp 1")
    assert out.result.metrics["vri.rejected"] == 1 and res.vri == [(1, ERROR, 0)]


def test_program_test_requires_its_option():
    with pytest.raises(UsageError, match="needs option 'program'"):
        run_test("program", "soc", 1)


def test_gsa_calls_stay_in_domain_and_sample_coverage():
    out = run_test("gsa_gain", "soc", 4, options={"calls": 30})
    records = out.extras["gsa_records"]
    assert len(records) == 30 and out.passed
    assert all(0 <= r.params["gain"] <= 255 and r.status == 0 for r in records)
    assert all(r.variables["gain_mirror"] == r.params["gain"] for r in records)
    g = out.ctx.coverage["gain_cov"]
    cp = g.points["gain"]
    assert sum(cp.hits.values()) + cp.uncovered == cp.samples == 30
