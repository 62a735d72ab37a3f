import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vfab.config import ConfigDB
from vfab.seq import (
    Constraint, ConstraintError, Range, RangeSet, Rng, Sequence, SequenceError, ValueSet,
    VirtualSequence, randomize, run_sequence,
)
from vfab.sim import Timer
from vfab.tb import Agent, Component, Context, Driver, build_tree, run_phases


def test_rng_streams_are_keyed_by_seed_and_path():
    a = Rng(5, ("env", "seq"))
    b = Rng(5).substream("env", "seq")
    assert [a.randint(0, 1000) for _ in range(5)] == [b.randint(0, 1000) for _ in range(5)]
    assert Rng(5).substream("x").random() != Rng(5).substream("y").random()
    assert Rng(5).substream("x").random() != Rng(6).substream("x").random()


def test_rng_independent_of_other_streams():
    root = Rng(1)
    first = root.substream("a").randint(0, 1 << 30)
    root.substream("b").randint(0, 10)
    assert root.substream("a").randint(0, 1 << 30) == first


ranges = st.lists(st.tuples(st.integers(-100, 100), st.integers(0, 50)), min_size=1, max_size=5).map(
    lambda rs: [(lo, lo + span) for lo, span in rs])


@given(ranges, st.integers(0, 2 ** 32))
def test_rangeset_draws_in_domain(rs, seed):
    domain = RangeSet(rs)
    rng = Rng(seed)
    for _ in range(20):
        assert domain.draw(rng) in domain


def test_rangeset_picks_range_first():
    domain = RangeSet([(0, 0), (1, 1000)])
    rng = Rng(3)
    zeros = sum(domain.draw(rng) == 0 for _ in range(2000))
    assert 850 < zeros < 1150


def test_empty_domains_rejected():
    with pytest.raises(ConstraintError):
        Range(5, 4)
    with pytest.raises(ConstraintError):
        RangeSet([])
    with pytest.raises(ConstraintError):
        ValueSet(())


@dataclasses.dataclass(frozen=True)
class Txn:
    addr: int = 0
    data: int = 0
    kind: str = "write"


@given(st.integers(0, 2 ** 32))
def test_randomize_honours_domains_and_predicates(seed):
    c = Constraint({"addr": Range(0, 0xFC), "data": ValueSet((1, 2, 3, 4))},
                   [lambda v: v["addr"] % 4 == 0, lambda v: v["data"] != 3])
    t = randomize(Txn(kind="read"), c, Rng(seed))
    assert t.kind == "read" and t.addr % 4 == 0 and t.addr <= 0xFC and t.data in (1, 2, 4)
    assert randomize(Txn(), c, Rng(seed)) == randomize(Txn(), c, Rng(seed))


def test_randomize_dict_and_callable_domain():
    out = randomize({"x": 0, "y": 9}, Constraint({"x": lambda rng: 7}), Rng(1))
    assert out == {"x": 7, "y": 9}


def test_unsatisfiable_constraint_names_predicates():
    def never(v):
        return False
    with pytest.raises(ConstraintError, match="never"):
        randomize({}, Constraint({"x": Range(0, 3)}, [never]), Rng(1), max_tries=10)
    with pytest.raises(ConstraintError):
        randomize({}, Constraint({"x": 5}), Rng(1))


class AddDriver(Driver):
    def drive_item(self, item):
        yield Timer(2)
        return item + 100


class AddAgent(Agent):
    driver_cls = AddDriver


class Numbers(Sequence):
    def __init__(self, values, name=None):
        super().__init__(name)
        self.values = values
        self.responses = []

    def body(self):
        for v in self.values:
            self.responses.append((yield from self.do(v)))
        return sum(self.responses)


class Env(Component):
    kind = "env"

    def build_phase(self):
        self.a = AddAgent.create("a", self)
        self.b = AddAgent.create("b", self)

    def run_phase(self):
        return self.main()

    def main(self):
        self.raise_objection()
        yield from self.scenario(self)
        self.drop_objection()


def _run(scenario, passive=()):
    db = ConfigDB()
    db.set("env.*", "vif", object())
    for name in passive:
        db.set(f"env.{name}", "is_active", False)
    ctx = Context(config=db, rng=Rng(1))
    tree = build_tree(lambda c: Env("env", ctx=c), ctx=ctx)
    tree.root.scenario = scenario
    return run_phases(tree, 1000), tree


def test_sequence_on_sequencer_path_returns_body_value():
    out = {}

    def scenario(env):
        seq = Numbers([1, 2, 3])
        out["ret"] = yield from run_sequence(seq, "env.a.sequencer", owner=env)
        out["seq"] = seq

    result, _ = _run(scenario)
    assert result.passed and out["ret"] == 306 and out["seq"].rng is not None


def test_sequence_on_passive_agent_is_refused():
    def scenario(env):
        yield from run_sequence(Numbers([1]), "env.b.sequencer", owner=env)

    result, _ = _run(scenario, passive=["b"])
    assert result.codes() == ["exception"]
    assert "passive" in result.failures[0].message


def test_path_without_owner_and_missing_sequencer():
    with pytest.raises(SequenceError):
        run_sequence(Numbers([]), "x.y")
    seq = Numbers([1])
    with pytest.raises(SequenceError):
        list(seq.start(None))


def test_virtual_sequence_serial_and_parallel_timing():
    seqs = {}

    def scenario(env):
        seqs["a1"], seqs["b1"], seqs["a2"], seqs["b2"] = (Numbers([1, 2], n) for n in ("a1", "b1", "a2", "b2"))
        v = VirtualSequence("v")
        v.serial(("a.sequencer", seqs["a1"]), ("b.sequencer", seqs["b1"]))
        v.parallel(("a.sequencer", seqs["a2"]), ("b.sequencer", seqs["b2"]))
        yield from v.start(None, env=env)
        seqs["end"] = env.kernel.now

    result, _ = _run(scenario)
    assert result.passed
    # serial: 2 + 2 items, parallel: 2 items overlapped; 2 ticks per item
    assert seqs["end"] == 12
    assert seqs["a2"].responses == [101, 102]
    assert seqs["a1"].rng.path != seqs["b1"].rng.path


def test_sequence_failures_reach_owner():
    class Failing(Sequence):
        def body(self):
            self.fail("my_check", "went wrong")
            yield Timer(1)

    def scenario(env):
        yield from run_sequence(Failing(), None, owner=env)

    result, _ = _run(scenario)
    assert result.codes() == ["my_check"]
