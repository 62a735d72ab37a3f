"""Built-in tests.  Each body is a generator over the :class:`TestRoot` API."""

from __future__ import annotations

from pathlib import Path

from ..coverage import CoverGroup, CoverPoint
from ..regmodel import RegSequence, bitbash_seq, reset_check_seq, write_read_all_seq
from ..seq import RangeSet, VirtualSequence
from ..sw import GsaAdapter, SwFunctionDecl, parse_program, program
from ..uvcs.vsp import SendFrameSeq
from .envs import DATA_DIR
from .harness import register
from .stimulus import FrameSpec, frame_from_spec, timing_from_seed

GAIN_BINS = (("zero", 0, 0), ("low", 1, 0x0F), ("unity", 0x10, 0x10), ("high", 0x11, 0xFF))


def _configure_ganc(t, gain, offset, enable=1):
    yield from t.write("ganc.GAIN", gain)
    yield from t.write("ganc.OFFSET", offset)
    yield from t.write("ganc.CTRL", enable)


def _seed(t):
    return t.rng.randint(1, 0xFFFF)


@register("smoke_ganc", ("ip", "subsys", "soc"),
          "random gain/offset, one 64x64 random frame with random timing")
def smoke_ganc(t):
    yield from _configure_ganc(t, t.rng.randint(0, 0xFF), t.rng.randint(0, 0xFF))
    yield from t.set_geometry(64, 64)
    yield from t.send_frame(FrameSpec(64, 64, "random", _seed(t)))


@register("smoke_thr", ("ip", "subsys"), "random threshold, one 32x32 random frame", ip="thr")
def smoke_thr(t):
    yield from t.write("thr.THRESH", t.rng.randint(0, 0xFF))
    yield from t.write("thr.CTRL", 1)
    yield from t.set_geometry(32, 32)
    yield from t.send_frame(FrameSpec(32, 32, "random", _seed(t)))


def _builtins(t, ip):
    model, amap = t.model, t.env.regmap
    for seq in (reset_check_seq(model, amap, ip), bitbash_seq(model, amap, ip),
                write_read_all_seq(model, amap, t.rng.substream("write_read_all"), ip)):
        yield from t.run_sequence(seq)
        t.notes[seq.name] = dict(seq.verdicts)


@register("reg_builtin_ganc", ("ip", "subsys"), "reset check, bit bash and write/read of every GANC register")
def reg_builtin_ganc(t):
    yield from _builtins(t, "ganc")


@register("reg_builtin_thr", ("ip", "subsys"), "built-in register sequences on THR", ip="thr")
def reg_builtin_thr(t):
    yield from _builtins(t, "thr")


@register("random_frames", ("ip", "subsys"),
          "N random frames (option 'frames', default 100) up to 64x64 with per-frame random settings")
def random_frames(t):
    n = int(t.option("frames", 100))
    for _ in range(n):
        w, h = t.rng.randint(1, 64), t.rng.randint(1, 64)
        yield from _configure_ganc(t, t.rng.randint(0, 0xFF), t.rng.randint(0, 0xFF), t.rng.randint(0, 1))
        yield from t.set_geometry(w, h)
        yield from t.send_frame(FrameSpec(w, h, "random", _seed(t)))


@register("irq_ganc", ("ip", "subsys", "soc"), "frame-done interrupt enabled, raised and cleared twice")
def irq_ganc(t):
    yield from t.write("ganc.INT_ENABLE", 1)
    yield from _configure_ganc(t, 0x18, 0x05)
    yield from t.set_geometry(16, 8)
    line = t.platform.ips["ganc"].irq
    for i in range(2):
        yield from t.send_frame(FrameSpec(16, 8, "ramp", 0))
        if t.core is not None:
            yield from t.run_program(program("irq", "irqwait 0 200"))
        else:
            yield from t.wait_irq(line, 200)
        yield from t.cycles(4)
        yield from t.write("ganc.INT_STATUS", 1)
        yield from t.read("ganc.INT_STATUS", 0)


@register("chain", ("subsys", "soc"), "GANC then THR with fixed settings on two random frames")
def chain(t):
    yield from _configure_ganc(t, 0x20, 0xFB)
    yield from t.write("thr.THRESH", 0x80)
    yield from t.write("thr.CTRL", 1)
    yield from t.set_geometry(24, 12)
    for _ in range(2):
        yield from t.send_frame(FrameSpec(24, 12, "random", _seed(t)))


class ConfigureSeq(RegSequence):
    """Register-only configuration written against names, never addresses."""

    def __init__(self, name="configure", gain=0x20, offset=0xFB, width=16, height=16, irq=1):
        super().__init__(name)
        self.settings = [("ganc.INT_ENABLE", irq), ("ganc.GAIN", gain), ("ganc.OFFSET", offset),
                         ("ganc.WIDTH", width), ("ganc.HEIGHT", height), ("ganc.CTRL", 1)]

    def body(self):
        for name, value in self.settings:
            yield from self.write(name, value)
        for name, value in self.settings:
            got = yield from self.read(name)
            if got != value:
                self.fail("configure", f"{name}: read {got}, expected {value:#x}")


@register("name_reuse", ("ip", "subsys", "soc"),
          "one register sequence object run unchanged at every level", soc_master="bfm")
def name_reuse(t):
    seq = t.option("sequence") or ConfigureSeq()
    yield from t.run_sequence(seq)
    t.notes["trace"] = list(t.env.srb.monitor.observed)


REUSE_FRAME = FrameSpec(16, 16, "ramp", 7)


@register("reuse_soc_vri", ("ip", "soc"),
          "configure and send one frame: virtual sequence at IP level, test program via VRI at SoC")
def reuse_soc_vri(t):
    if t.core is not None:
        text = (DATA_DIR / "scenarios" / "reuse_soc_vri.prog").read_text()
        result = yield from t.run_program(parse_program(text, "reuse_soc_vri.prog"))
        t.notes["program_status"] = result.status
        return
    vseq = VirtualSequence("configure_and_send")
    vseq.serial((None, ConfigureSeq()))
    vseq.serial(("vsp.sequencer", SendFrameSeq(frame_from_spec(REUSE_FRAME), timing_from_seed(REUSE_FRAME.seed))))
    yield from vseq.start(None, env=t.env)


def load_program(source):
    """A TestProgram from inline text, a scenario name or a file path."""
    if "\n" in source or " " in source:
        return parse_program(source, "inline")
    path = DATA_DIR / "scenarios" / source
    if not path.exists():
        path = Path(source)
    return parse_program(path.read_text(), path.name)


@register("program", ("soc",), "run the test program given by option/config key 'program' on the core",
          requires=("program",))
def run_program_test(t):
    source = t.option("program")
    result = yield from t.run_program(load_program(source))
    t.notes["program_result"] = result


def gain_cov_group():
    return CoverGroup("gain_cov", [CoverPoint("gain", GAIN_BINS)])


def configure_gain_decl(t):
    model = t.model
    return SwFunctionDecl(
        "configure_gain",
        {"gain": RangeSet([(lo, hi) for _, lo, hi in GAIN_BINS])},
        lambda gain: program("configure_gain", f"w ganc.GAIN {gain}", "r ganc.GAIN"),
        {"gain_mirror": lambda: model.field_value("ganc.GAIN.GAIN")},
    )


@register("gsa_gain", ("soc",), "randomized configure_gain() calls through the core (option 'calls')")
def gsa_gain(t):
    group = gain_cov_group()
    t.ctx.coverage[group.name] = group
    gsa = GsaAdapter(t.core, [group])
    gsa.declare(configure_gain_decl(t))
    rng = t.rng.substream("gsa")
    calls = int(t.option("calls", 20))
    full_at = None
    for i in range(calls):
        yield from gsa.call("configure_gain", rng)
        if full_at is None and group.percent() == 100.0:
            full_at = i + 1
    t.notes["gsa_records"] = list(gsa.records)
    t.ctx.metrics["gsa.calls"] = calls
    if full_at is not None:
        t.ctx.metrics["gsa.calls_to_full"] = full_at
