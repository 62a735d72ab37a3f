"""Running one registered test at one integration level."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..checking import FrameScoreboard
from ..config import ConfigDB
from ..coverage import cov_report
from ..regmodel import RegSequence
from ..seq import Rng, run_sequence
from ..sim import Kernel, RisingEdge, wait_cycles
from ..sw import program
from ..tb import Component, Context, build_tree, run_phases
from ..uvcs.vsp import SendFrameSeq
from .duts import PLATFORMS, FaultMode, parse_fault
from .envs import ENV_CLASSES, load_ip_bundles
from .stimulus import FrameSpec, frame_from_spec, timing_from_seed

log = logging.getLogger(__name__)

LEVELS = ("ip", "subsys", "soc")
DEFAULT_WATCHDOG = 20_000_000
DRAIN_LIMIT = 5000
IRQ_SETTLE = 40


class UsageError(Exception):
    """Bad test name, level or option; the CLI maps it to exit status 2."""


@dataclass(frozen=True)
class TestSpec:
    name: str
    levels: tuple
    body: object
    description: str = ""
    ip: str = "ganc"
    soc_master: str = "core"
    requires: tuple = ()


REGISTRY = {}


def register(name, levels, description="", ip="ganc", soc_master="core", requires=()):
    def deco(fn):
        if name in REGISTRY:
            raise ValueError(f"test {name} registered twice")
        REGISTRY[name] = TestSpec(name, tuple(levels), fn, description, ip, soc_master, tuple(requires))
        return fn
    return deco


def get_test(name):
    from . import tests  # noqa: F401  (registers the built-in tests)
    try:
        return REGISTRY[name]
    except KeyError:
        raise UsageError(f"unknown test {name!r}; see 'vfab list-tests'") from None


def list_tests():
    from . import tests  # noqa: F401
    return [REGISTRY[n] for n in sorted(REGISTRY)]


class TestRoot(Component):
    """Top of the tree: owns the env and runs the test body under an objection.

    Test bodies talk to the DUT through the small API below, which hides
    whether stimulus goes through register and video sequences or through
    software running on the SoC core.
    """

    kind = "env"

    def __init__(self, name, parent=None, spec=None, level="ip", options=None, platform=None, **kw):
        super().__init__(name, parent, **kw)
        self.spec = spec
        self.level = level
        self.options = dict(options or {})
        self.platform = platform
        self.rng = self.ctx.rng.substream("test", spec.name)
        self.notes = {}

    def build_phase(self):
        self.env = ENV_CLASSES[self.level].create("env", self)

    def run_phase(self):
        return self._main()

    def option(self, key, default=None):
        if key in self.options:
            return self.options[key]
        return self.get_config(key, default)

    @property
    def core(self):
        return getattr(self.env, "core", None)

    @property
    def model(self):
        return self.env.regmodel

    def _main(self):
        self.raise_objection()
        try:
            rst = self.platform.rst_n
            while not rst.value:
                yield RisingEdge(rst)
            self._regs = RegSequence("test_regs", self.model, self.env.regmap).bind(owner=self.env)
            yield from self.spec.body(self)
            yield from self.drain()
        finally:
            self.drop_objection()

    # -- API used by test bodies --------------------------------------------------
    def has_block(self, name):
        return name in self.model.blocks

    def cycles(self, n):
        yield from wait_cycles(self.platform.clk, n)

    def write(self, name, value):
        if self.core is not None:
            yield from self.run_program(program(f"w {name}", f"w {name} {value & 0xFFFF_FFFF:#x}"))
            return
        yield from self._regs.write(name, value & 0xFFFF_FFFF)

    def read(self, name, expect=None):
        if self.core is not None:
            stmt = f"r {name}" + (f" {expect:#x}" if expect is not None else "")
            res = yield from self.run_program(program(f"r {name}", stmt))
            return res.reads[-1][1] if res.reads else None
        data = yield from self._regs.read(name)
        if expect is not None and data is not None and data != expect:
            self.error("test_check", f"{name}: read {data:#x}, expected {expect:#x}")
        return data

    def run_program(self, prog):
        if self.core is None:
            raise RuntimeError("no core model at this level")
        return (yield from self.core.execute(prog))

    def run_sequence(self, seq, sequencer=None):
        return (yield from run_sequence(seq, sequencer, owner=self.env,
                                        model=self.model, amap=self.env.regmap))

    def set_geometry(self, width, height):
        for ip in ("ganc", "thr"):
            if self.has_block(ip):
                yield from self.write(f"{ip}.WIDTH", width)
                yield from self.write(f"{ip}.HEIGHT", height)

    def send_frame(self, spec):
        """Send one frame; returns its frame id."""
        if self.core is not None:
            res = yield from self.run_program(program(
                "send_frame", f"vri SEND_FRAME {spec.width} {spec.height} {spec.pattern} {spec.seed}"))
            return res.vri[-1][2] if res.vri else None
        seq = SendFrameSeq(frame_from_spec(spec), timing_from_seed(spec.seed))
        return (yield from run_sequence(seq, f"{self.env.path}.vsp.sequencer", owner=self.env))

    def wait_irq(self, signal, cycles):
        """Wait for a level-high interrupt; returns False on timeout."""
        for _ in range(cycles):
            if signal.value:
                return True
            yield RisingEdge(self.platform.clk)
        return bool(signal.value)

    def scoreboards(self):
        return [c for c in self.walk() if isinstance(c, FrameScoreboard)]

    def drain(self):
        """Let in-flight frames reach their scoreboards, then let interrupts settle."""
        limit = self.option("drain_limit", DRAIN_LIMIT)
        sbs = self.scoreboards()
        waited = 0
        while waited < limit and any(sb.expected or sb.snapshots for sb in sbs):
            yield from self.cycles(4)
            waited += 4
        yield from self.cycles(IRQ_SETTLE)


@dataclass
class RunOutcome:
    test: str
    level: str
    seed: int
    fault: FaultMode
    result: object
    coverage: object
    root: TestRoot
    ctx: Context
    platform: object
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.result.passed

    @property
    def mismatches(self):
        return self.result.metrics.get("mismatches", 0)


def run_test(name, level="ip", seed=1, fault="none", config=None, options=None, bundles=None,
             watchdog=None, trace=True):
    """Build and run one test; returns a :class:`RunOutcome`.

    ``config`` is ConfigDB text (``pattern key value`` lines) or a ConfigDB.
    """
    spec = get_test(name)
    if level not in LEVELS:
        raise UsageError(f"unknown level {level!r} (choose from {', '.join(LEVELS)})")
    if level not in spec.levels:
        raise UsageError(f"test {name} does not support level {level} (supports {', '.join(spec.levels)})")
    try:
        fault_mode = parse_fault(fault) if isinstance(fault, str) or fault is None else fault
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    db = config if isinstance(config, ConfigDB) else ConfigDB()
    if isinstance(config, str):
        db.load_text(config)
    for key in spec.requires:
        if key not in (options or {}) and db.get("test", key) is None:
            raise UsageError(f"test {name} needs option {key!r} (e.g. config line 'test {key} VALUE')")
    kernel = Kernel(trace=trace)
    ctx = Context(kernel, db, rng=Rng(seed))
    try:
        if level == "ip":
            platform = PLATFORMS[level](kernel, spec.ip, fault_mode)
        else:
            platform = PLATFORMS[level](kernel, fault_mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bundles = load_ip_bundles(bundles)

    env = "test.env"
    db.set(env, "platform", platform)
    db.set(env, "bundles", bundles)
    if level == "ip":
        db.set(env, "ip", spec.ip)
        db.set(env, "ports", platform.ips[spec.ip])
        db.set(env, "bundle", bundles[spec.ip])
    if level == "soc":
        db.set(env, "master", spec.soc_master)

    tree = build_tree(lambda c: TestRoot("test", ctx=c, spec=spec, level=level,
                                         options=options, platform=platform), ctx=ctx)
    limit = watchdog or db.get("test", "watchdog", DEFAULT_WATCHDOG)
    result = run_phases(tree, limit)
    log.info("%s@%s seed=%s fault=%s: %s", name, level, seed, fault_mode, result.verdict)
    return RunOutcome(name, level, seed, fault_mode, result, cov_report(ctx.coverage), tree.root, ctx,
                      platform, dict(tree.root.notes))
