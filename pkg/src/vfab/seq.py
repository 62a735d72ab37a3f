"""Seeded constrained-random stimulus and sequence execution.

Random streams are keyed by a hierarchical path under the test seed, so the
values a given (seed, path) draws never depend on what other components or
sequences exist in the environment.
"""

from __future__ import annotations

import dataclasses
import hashlib
import random
from dataclasses import dataclass

from .sim import Join

MASK64 = (1 << 64) - 1
MAX_TRIES = 1000


class ConstraintError(Exception):
    pass


class SequenceError(Exception):
    pass


class Rng:
    """Deterministic random stream identified by ``(seed, path)``."""

    def __init__(self, seed, path=()):
        self.seed = seed & MASK64
        self.path = tuple(path)
        digest = hashlib.blake2b(
            "/".join((str(self.seed),) + self.path).encode(), digest_size=8).digest()
        self._random = random.Random(int.from_bytes(digest, "big"))

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={'/'.join(self.path) or '<root>'})"

    def substream(self, *names):
        return Rng(self.seed, self.path + tuple(str(n) for n in names))

    def randint(self, lo, hi):
        return self._random.randint(lo, hi)

    def random(self):
        return self._random.random()

    def choice(self, seq):
        return self._random.choice(seq)

    def getrandbits(self, k):
        return self._random.getrandbits(k)


# -- domains -----------------------------------------------------------------


@dataclass(frozen=True)
class Range:
    lo: int
    hi: int

    def __post_init__(self):
        if self.hi < self.lo:
            raise ConstraintError(f"empty range [{self.lo}..{self.hi}]")

    def draw(self, rng):
        return rng.randint(self.lo, self.hi)

    def __contains__(self, value):
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class RangeSet:
    """Union of ranges.  A draw picks a range uniformly, then a value in it."""

    ranges: tuple

    def __post_init__(self):
        if not self.ranges:
            raise ConstraintError("empty range set")
        object.__setattr__(self, "ranges", tuple(
            r if isinstance(r, Range) else Range(*r) for r in self.ranges))

    def draw(self, rng):
        return rng.choice(self.ranges).draw(rng)

    def __contains__(self, value):
        return any(value in r for r in self.ranges)


@dataclass(frozen=True)
class ValueSet:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ConstraintError("empty value set")

    def draw(self, rng):
        return rng.choice(self.values)

    def __contains__(self, value):
        return value in self.values


def _draw(domain, rng):
    if hasattr(domain, "draw"):
        return domain.draw(rng)
    if callable(domain):
        return domain(rng)
    raise ConstraintError(f"unsupported domain {domain!r}")


@dataclass
class Constraint:
    """Per-field domains plus cross-field predicates over the drawn values."""

    domains: dict
    predicates: list = dataclasses.field(default_factory=list)

    def names(self):
        return [getattr(p, "__name__", repr(p)) for p in self.predicates]


def randomize(template, constraint, rng, max_tries=MAX_TRIES):
    """Return a copy of ``template`` with constrained fields drawn from ``rng``.

    ``template`` may be a dict or a dataclass instance.  Predicates receive the
    full set of values as a dict and are enforced by rejection sampling.
    """
    base = dataclasses.asdict(template) if dataclasses.is_dataclass(template) else dict(template)
    for _ in range(max_tries):
        values = dict(base)
        for name, domain in constraint.domains.items():
            values[name] = _draw(domain, rng)
        if all(p(values) for p in constraint.predicates):
            if dataclasses.is_dataclass(template):
                return dataclasses.replace(template, **{k: values[k] for k in constraint.domains})
            return values
    raise ConstraintError(
        f"constraints unsatisfiable after {max_tries} tries: {', '.join(constraint.names())}")


# -- sequences ---------------------------------------------------------------


class Sequence:
    """A generator of items run on one sequencer.

    Subclasses implement :meth:`body` as a generator; items go out through
    :meth:`do`.  Failures are collected on the sequence and forwarded to the
    owning component, if any.
    """

    def __init__(self, name=None):
        self.name = name or type(self).__name__
        self.sequencer = None
        self.owner = None
        self.rng = None
        self.failures = []
        self.items = []

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def bind(self, sequencer=None, owner=None, rng=None, **_):
        if sequencer is not None:
            self.sequencer = sequencer
        if owner is not None:
            self.owner = owner
        if rng is not None:
            self.rng = rng
        if self.rng is None and self.owner is not None and self.owner.ctx.rng is not None:
            self.rng = self.owner.ctx.rng.substream(self.owner.path, self.name)
        return self

    def start(self, sequencer=None, **bind):
        self.bind(sequencer=sequencer, **bind)
        return (yield from self.body())

    def body(self):
        return None
        yield

    def do(self, item):
        if self.sequencer is None:
            raise SequenceError(f"sequence {self.name} has no sequencer")
        self.items.append(item)
        return (yield from self.sequencer.execute(item))

    def fail(self, code, message):
        self.failures.append((code, message))
        if self.owner is not None:
            self.owner.error(code, message)

    def child_rng(self, name):
        return self.rng.substream(name) if self.rng is not None else None


def resolve_sequencer(ctx, path):
    """Find an active sequencer by absolute path."""
    comp = ctx.find(path)
    if comp is not None and comp.kind == "sequencer":
        return comp
    agent = ctx.find(path.rpartition(".")[0])
    if agent is not None and agent.kind == "agent" and not getattr(agent, "is_active", True):
        raise SequenceError(f"cannot start a sequence on {path}: agent {agent.path} is passive")
    raise SequenceError(f"no sequencer at {path}")


def run_sequence(seq, sequencer, owner=None, **bind):
    """Generator running ``seq`` on ``sequencer`` (a component or a path)."""
    if isinstance(sequencer, str):
        if owner is None:
            raise SequenceError("a sequencer path needs an owner to resolve against")
        sequencer = resolve_sequencer(owner.ctx, sequencer)
    elif sequencer is not None and sequencer.kind != "sequencer":
        raise SequenceError(f"{sequencer.path} is not a sequencer")
    return seq.start(sequencer, owner=owner, **bind)


class VirtualSequence(Sequence):
    """Coordinates child sequences on several sequencers.

    ``plan`` is a list of ``(mode, launches)`` groups with ``mode`` either
    ``"serial"`` or ``"parallel"``; each launch is ``(sequencer_path,
    sequence)``.  Paths are relative to the ``env`` the virtual sequence is
    started on, so the same source works wherever that env is instantiated.
    A ``None`` path runs the child without a sequencer (register sequences
    reach the bus through the register map instead).
    """

    def __init__(self, name=None, plan=None):
        super().__init__(name)
        self.plan = list(plan or [])
        self.env = None

    def serial(self, *launches):
        self.plan.append(("serial", launches))
        return self

    def parallel(self, *launches):
        self.plan.append(("parallel", launches))
        return self

    def bind(self, env=None, **kw):
        if env is not None:
            self.env = env
            kw.setdefault("owner", env)
        return super().bind(**kw)

    def _resolve(self):
        resolved = []
        for mode, launches in self.plan:
            if mode not in ("serial", "parallel"):
                raise SequenceError(f"unknown grouping {mode!r}")
            group = []
            for path, seq in launches:
                sqr = None
                if path is not None:
                    sqr = resolve_sequencer(self.env.ctx, f"{self.env.path}.{path}")
                group.append((sqr, seq))
            resolved.append((mode, group))
        return resolved

    def _child_bind(self, seq):
        bind = {"owner": self.owner, "rng": self.child_rng(seq.name), "env": self.env}
        model = getattr(self.env, "regmodel", None)
        if model is not None:
            bind.update(model=model, amap=self.env.regmap)
        return bind

    def body(self):
        groups = self._resolve()
        kernel = self.env.kernel
        for mode, group in groups:
            if mode == "serial":
                for sqr, seq in group:
                    yield from seq.start(sqr, **self._child_bind(seq))
            else:
                procs = [kernel.spawn(seq.start(sqr, **self._child_bind(seq)),
                                      f"{self.env.path}.{self.name}.{seq.name}")
                         for sqr, seq in group]
                for proc in procs:
                    yield Join(proc)


def run_virtual(vseq, env):
    return vseq.start(None, env=env)
