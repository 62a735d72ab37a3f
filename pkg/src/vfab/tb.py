"""Testbench component model: hierarchy, phases, agents and analysis paths.

A tree is built top-down by :func:`build_tree` and executed by
:func:`run_phases` in the order build, connect, run, extract, check, report.
The run phase lasts until every raised objection has been dropped, or until
the watchdog expires, in which case the test fails with a ``hang``
diagnosis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import ConfigDB, glob_match
from .sim import Future, Kernel, Queue

log = logging.getLogger(__name__)

PHASES = ("build", "connect", "run", "extract", "check", "report")
KINDS = ("env", "agent", "driver", "monitor", "sequencer", "scoreboard", "checker", "custom")
DEFAULT_WATCHDOG = 50_000_000


class BuildError(Exception):
    pass


class PhaseError(Exception):
    pass


@dataclass(frozen=True)
class Failure:
    source: str
    code: str
    message: str
    time: int = 0

    def __str__(self):
        return f"[{self.time}] {self.source}: {self.code}: {self.message}"


@dataclass(frozen=True)
class TestResult:
    verdict: str
    failures: tuple = ()
    end_time: int = 0
    trace_hash: str | None = None
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"

    def codes(self):
        return [f.code for f in self.failures]


class Factory:
    """Constructor overrides keyed by path pattern; the latest set wins."""

    def __init__(self):
        self.overrides = []

    def set_override(self, original, replacement, pattern="**"):
        self.overrides.append((pattern, original, replacement))

    def resolve(self, cls, path):
        for pattern, original, replacement in reversed(self.overrides):
            if original is cls and glob_match(pattern, path):
                return replacement
        return cls


class Objections:
    def __init__(self, ctx):
        self.ctx = ctx
        self.held = {}

    @property
    def total(self):
        return sum(self.held.values())

    def raise_(self, comp, count=1):
        self.held[comp.path] = self.held.get(comp.path, 0) + count

    def drop(self, comp, count=1):
        have = self.held.get(comp.path, 0)
        if count > have:
            raise PhaseError(f"{comp.path} dropped {count} objection(s) but holds {have}")
        self.held[comp.path] = have - count
        if self.total == 0 and self.ctx.phase == "run":
            self.ctx.kernel.stop()


class Context:
    """State shared by every component of one tree (one simulation)."""

    def __init__(self, kernel=None, config=None, factory=None, rng=None):
        self.kernel = kernel if kernel is not None else Kernel(trace=True)
        self.config = config if config is not None else ConfigDB()
        self.factory = factory if factory is not None else Factory()
        self.rng = rng
        self.phase = None
        self.failures = []
        self.objections = Objections(self)
        self.components = {}
        self.phase_log = []
        self.coverage = {}
        self.metrics = {}

    def error(self, source, code, message):
        failure = Failure(source, code, message, self.kernel.now)
        log.error("%s", failure)
        self.failures.append(failure)
        return failure

    def find(self, path):
        return self.components.get(path)

    def bump(self, key, amount=1):
        self.metrics[key] = self.metrics.get(key, 0) + amount


class Component:
    kind = "custom"

    def __init__(self, name, parent=None, ctx=None):
        if not name or "." in name:
            raise BuildError(f"invalid component name {name!r}")
        self.name = name
        self.parent = parent
        self.children = []
        self._ports = {}
        self._exports = {}
        if parent is None:
            self.ctx = ctx if ctx is not None else Context()
            self.path = name
        else:
            self.ctx = parent.ctx
            self.path = f"{parent.path}.{name}"
        if self.ctx.phase != "build":
            raise BuildError(f"{self.path}: components may only be created during build")
        if self.path in self.ctx.components:
            raise BuildError(f"duplicate component path {self.path}")
        self.ctx.components[self.path] = self
        if parent is not None:
            parent.children.append(self)

    @classmethod
    def create(cls, name, parent, *args, **kwargs):
        path = f"{parent.path}.{name}" if parent is not None else name
        ctx = parent.ctx if parent is not None else kwargs.get("ctx")
        target = ctx.factory.resolve(cls, path) if ctx is not None else cls
        return target(name, parent, *args, **kwargs)

    def __repr__(self):
        return f"<{type(self).__name__} {self.path}>"

    @property
    def kernel(self):
        return self.ctx.kernel

    def get_config(self, key, default=None):
        return self.ctx.config.get(self.path, key, default)

    def child(self, name):
        for c in self.children:
            if c.name == name:
                return c
        return None

    def lookup(self, rel_path):
        return self.ctx.find(f"{self.path}.{rel_path}")

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def error(self, code, message):
        return self.ctx.error(self.path, code, message)

    def spawn(self, gen, suffix=None):
        name = self.path if suffix is None else f"{self.path}.{suffix}"
        return self.kernel.spawn(gen, name)

    def raise_objection(self, count=1):
        self.ctx.objections.raise_(self, count)

    def drop_objection(self, count=1):
        self.ctx.objections.drop(self, count)

    def port(self, name):
        return self._ports[name]

    def export(self, name):
        return self._exports[name]

    # phase hooks
    def build_phase(self):
        pass

    def connect_phase(self):
        pass

    def run_phase(self):
        return None

    def extract_phase(self):
        pass

    def check_phase(self):
        pass

    def report_phase(self):
        pass


class AnalysisPort:
    """Broadcasts each written item to every subscriber in connection order."""

    def __init__(self, owner, name):
        self.owner = owner
        self.name = name
        self.subscribers = []
        owner._ports[name] = self

    def connect(self, subscriber):
        if self.owner.ctx.phase != "connect":
            raise PhaseError(
                f"{self.owner.path}.{self.name}: connect during {self.owner.ctx.phase} phase")
        if not hasattr(subscriber, "write"):
            subscriber = AnalysisExport(None, "fn", subscriber)
        self.subscribers.append(subscriber)

    def write(self, item):
        for sub in self.subscribers:
            sub.write(item)


class AnalysisExport:
    def __init__(self, owner, name, callback):
        self.owner = owner
        self.name = name
        self.callback = callback
        if owner is not None:
            owner._exports[name] = self

    def write(self, item):
        self.callback(item)


def connect_analysis(publisher, port_name, subscriber, export_name):
    publisher.port(port_name).connect(subscriber.export(export_name))


class Sequencer(Component):
    """Grants items to the driver strictly in arrival order."""

    kind = "sequencer"

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self._requests = None
        self.granted = 0

    @property
    def requests(self):
        if self._requests is None:
            self._requests = Queue(self.kernel)
        return self._requests

    def execute(self, item):
        """Hand ``item`` to the driver and wait for its response."""
        done = Future(self.kernel)
        self.requests.put((item, done))
        return (yield done)

    def get_next(self):
        item, done = yield from self.requests.get()
        self.granted += 1
        return item, done


class Driver(Component):
    kind = "driver"

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.sequencer = None
        self.vif = None

    def run_phase(self):
        return self._serve()

    def _serve(self):
        while True:
            item, done = yield from self.sequencer.get_next()
            response = yield from self.drive_item(item)
            done.set_result(response)

    def drive_item(self, item):
        raise NotImplementedError
        yield


class Monitor(Component):
    kind = "monitor"

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.ap = AnalysisPort(self, "ap")
        self.vif = None


class Agent(Component):
    """Active agents own driver, sequencer and monitor; passive ones a monitor."""

    kind = "agent"
    driver_cls = Driver
    monitor_cls = Monitor
    sequencer_cls = Sequencer

    def build_phase(self):
        self.is_active = bool(self.get_config("is_active", True))
        self.vif = self.get_config("vif")
        if self.is_active and self.vif is None:
            raise BuildError(f"{self.path}: active agent has no interface binding ('vif')")
        self.monitor = self.monitor_cls.create("monitor", self)
        self.monitor.vif = self.vif
        if self.is_active:
            self.sequencer = self.sequencer_cls.create("sequencer", self)
            self.driver = self.driver_cls.create("driver", self)
            self.driver.vif = self.vif
        else:
            self.sequencer = None
            self.driver = None

    def connect_phase(self):
        if self.is_active:
            self.driver.sequencer = self.sequencer


# -- interface profile ------------------------------------------------------


@dataclass(frozen=True)
class InterfaceProfile:
    """Counts of input video (A), memory (B), output video (C), interrupt (D)
    and register (E) interfaces of an IP."""

    A: int = 0
    B: int = 0
    C: int = 0
    D: int = 0
    E: int = 0

    def __post_init__(self):
        for name in "ABCDE":
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"interface count {name} must be a non-negative integer, got {value!r}")


@dataclass(frozen=True)
class VideoRole:
    index: int
    drives_input: bool
    monitors_output: bool


@dataclass(frozen=True)
class AgentPlan:
    reg_agents: tuple = ()
    video_agents: tuple = ()
    interrupt_checkers: tuple = ()


def derive_agent_plan(profile):
    if profile.B:
        log.warning("profile has %d memory interface(s); no memory agents are planned", profile.B)
    m = max(profile.A, profile.C)
    return AgentPlan(
        reg_agents=tuple(range(profile.E)),
        video_agents=tuple(VideoRole(i, i < profile.A, i < profile.C) for i in range(m)),
        interrupt_checkers=tuple(range(profile.D)),
    )


def indexed(base, i, count):
    return base if count == 1 else f"{base}{i}"


# -- phasing ----------------------------------------------------------------


@dataclass
class ComponentTree:
    root: Component
    ctx: Context

    def find(self, path):
        return self.ctx.find(path)

    def components(self):
        return list(self.root.walk())


def _note_phase(ctx, comp, phase):
    ctx.phase_log.append((len(ctx.phase_log), comp.path, phase))


def build_tree(env_factory, config=None, ctx=None):
    """Build a hierarchy top-down.  ``env_factory(ctx)`` returns the root."""
    if ctx is None:
        ctx = Context(config=config)
    elif config is not None:
        ctx.config = config
    ctx.phase = "build"
    root = env_factory(ctx)
    done = set()
    pending = [root]
    while pending:
        comp = pending.pop(0)
        comp.build_phase()
        _note_phase(ctx, comp, "build")
        done.add(comp.path)
        pending.extend(c for c in comp.children if c.path not in done and c not in pending)
    ctx.phase = "built"
    return ComponentTree(root, ctx)


def run_phases(tree, watchdog=DEFAULT_WATCHDOG):
    ctx = tree.ctx
    kernel = ctx.kernel
    comps = tree.components()

    ctx.phase = "connect"
    for comp in comps:
        comp.connect_phase()
        _note_phase(ctx, comp, "connect")

    ctx.phase = "run"
    for comp in comps:
        gen = comp.run_phase()
        _note_phase(ctx, comp, "run")
        if gen is not None:
            kernel.spawn(gen, comp.path)
    try:
        kernel.run_until(kernel.now)
        if ctx.objections.total:
            kernel.run_until(watchdog)
    except Exception as exc:
        log.exception("simulation raised")
        ctx.error(tree.root.path, "exception", f"{type(exc).__name__}: {exc}")
    else:
        if ctx.objections.total:
            held = ", ".join(p for p, n in ctx.objections.held.items() if n)
            stuck = "; ".join(f"{name} waiting on {what}" for name, what in kernel.suspended())
            ctx.error(tree.root.path, "hang",
                      f"run phase did not finish by t={watchdog} (objections: {held}); "
                      f"suspended: {stuck}")
    end_time = kernel.now

    for phase in ("extract", "check", "report"):
        ctx.phase = phase
        for comp in reversed(comps):
            getattr(comp, f"{phase}_phase")()
            _note_phase(ctx, comp, phase)
    ctx.phase = "done"

    return TestResult(
        verdict="fail" if ctx.failures else "pass",
        failures=tuple(ctx.failures),
        end_time=end_time,
        trace_hash=kernel.trace_hash,
        metrics=dict(ctx.metrics),
    )
