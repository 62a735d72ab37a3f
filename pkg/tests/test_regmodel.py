import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vfab.regmodel import (
    AddressMap, BusAdapter, FieldDef, MapError, RegisterBlock, RegisterDef, RegisterLookupError,
    RegisterModel, RegModelError, bitbash_seq, reg_read, reg_write, reset_check_seq, write_read_all_seq,
)
from vfab.seq import Rng
from vfab.sim import Kernel, Timer


def defs():
    return [
        RegisterDef("CTRL", 0x0, (FieldDef("EN", 0, 1), FieldDef("MODE", 4, 3, reset=2))),
        RegisterDef("GAIN", 0x4, (FieldDef("GAIN", 0, 8, reset=0x10),)),
        RegisterDef("INT_STATUS", 0x8, (FieldDef("DONE", 0, 1, "W1C"),)),
        RegisterDef("STATUS", 0xC, (FieldDef("BUSY", 0, 1, "RO"), FieldDef("VER", 8, 8, "RO", reset=3))),
        RegisterDef("KICK", 0x10, (FieldDef("GO", 0, 1, "WO"),)),
    ]


class FakeHw:
    """Behavioural register file at ``base``; ``stuck`` forces bits to 0 on write."""

    def __init__(self, base, block_defs, stuck=None, reset_override=None):
        self.base = base
        self.defs = {base + d.offset: d for d in block_defs}
        self.mem = {a: d.reset_value for a, d in self.defs.items()}
        self.mem.update(reset_override or {})
        self.stuck = stuck or {}
        self.log = []

    def access(self, kind, addr, data):
        self.log.append((kind, addr, data))
        d = self.defs.get(addr)
        if d is None:
            return False, 0
        if kind == "write":
            data &= ~self.stuck.get(addr, 0)
            cur = self.mem[addr]
            w1c = d.mask_of("W1C")
            self.mem[addr] = (cur & d.mask_of("RO")) | (data & d.mask_of("RW")) | (cur & w1c & ~data)
            return True, 0
        return True, self.mem[addr] & d.mask_of("RW", "RO", "W1C")


class FakeSequencer:
    def __init__(self, kernel, hw):
        self.kernel = kernel
        self.hw = hw

    def execute(self, item):
        yield Timer(1)
        return self.hw.access(*item)


class TupleAdapter(BusAdapter):
    def reg2bus(self, kind, addr, data):
        return (kind, addr, data)

    def bus2reg(self, item):
        return item


def setup(base=0, **hw_kw):
    k = Kernel()
    model = RegisterModel([RegisterBlock("ip", defs())])
    model.reset()
    amap = AddressMap("m", base)
    amap.add_block(model.blocks["ip"])
    hw = FakeHw(base, defs(), **hw_kw)
    amap.adapter = TupleAdapter(FakeSequencer(k, hw))
    return k, model, amap, hw


def run(k, gen):
    out = {}

    def proc():
        out["ret"] = yield from gen
    k.spawn(proc(), "t")
    k.run_until(10 ** 9)
    return out.get("ret")


def test_field_and_register_validation():
    with pytest.raises(RegModelError):
        FieldDef("F", 30, 4)
    with pytest.raises(RegModelError):
        FieldDef("F", 0, 2, "RC")
    with pytest.raises(RegModelError):
        FieldDef("F", 0, 2, reset=4)
    with pytest.raises(RegModelError):
        RegisterDef("R", 2)
    with pytest.raises(RegModelError):
        RegisterDef("R", 0, (FieldDef("A", 0, 4), FieldDef("B", 3, 2)))
    with pytest.raises(RegModelError):
        RegisterDef("R", 0, width=16)
    with pytest.raises(RegModelError):
        RegisterBlock("b", [RegisterDef("A", 0), RegisterDef("B", 0)])


def test_reset_values_and_lookup():
    _, model, _, _ = setup()
    assert model.lookup("ip.CTRL").mirror == 0x20
    assert model.field_value("ip.STATUS.VER") == 3
    with pytest.raises(RegisterLookupError, match="did you mean ip.GAIN"):
        model.lookup("ip.GAN")
    with pytest.raises(RegisterLookupError):
        model.lookup("ip.CTRL.EN")


@given(st.integers(0, 0xFFFFFFFF), st.integers(0, 0xFFFFFFFF))
def test_predict_write_access_semantics(before, value):
    inst = RegisterModel([RegisterBlock("ip", [RegisterDef("R", 0, (
        FieldDef("rw", 0, 8), FieldDef("ro", 8, 8, "RO"), FieldDef("w1c", 16, 8, "W1C"),
        FieldDef("wo", 24, 8, "WO")))])]).lookup("ip.R")
    inst.mirror = before
    inst.predict_write(value)
    m = inst.mirror
    assert m & 0xFF == value & 0xFF
    assert m & 0xFF00 == before & 0xFF00
    assert m & 0xFF0000 == before & ~value & 0xFF0000
    assert m & 0xFF000000 == value & 0xFF000000


def test_nested_maps_shift_addresses():
    _, model, _, _ = setup()
    sub = AddressMap("sub")
    sub.add_block(model.blocks["ip"], 0x1000)
    top = AddressMap("soc", 0x4000_0000)
    top.add_submap(sub, 0x0)
    inst = model.lookup("ip.GAIN")
    assert sub.address_of(inst) == 0x1004
    assert top.address_of(inst) == 0x4000_1004
    assert top.resolve(0x4000_1004) is inst
    assert [i.name for i in top.registers()] == ["CTRL", "GAIN", "INT_STATUS", "STATUS", "KICK"]
    with pytest.raises(MapError):
        AddressMap("x").address_of(inst)


def test_overlapping_map_rejected():
    m1 = RegisterModel([RegisterBlock("a", defs()), RegisterBlock("b", defs())])
    amap = AddressMap("m").add_block(m1.blocks["a"], 0)
    with pytest.raises(MapError):
        amap.add_block(m1.blocks["b"], 0x8)


def test_adapter_lookup_walks_parents():
    sub = AddressMap("sub")
    top = AddressMap("top").add_submap(sub, 0)
    with pytest.raises(RegModelError):
        sub.get_adapter()
    top.adapter = "ad"
    assert sub.get_adapter() == "ad"


def test_frontdoor_write_read_and_mirror_check():
    k, model, amap, hw = setup(0x100)
    gain = model.lookup("ip.GAIN")
    assert run(k, reg_write(gain, 0x42, amap)) is True
    assert hw.mem[0x104] == 0x42 and gain.mirror == 0x42
    assert run(k, reg_read(gain, amap)) == 0x42
    assert model.failures == []
    hw.mem[0x104] = 0x43
    run(k, reg_read(gain, amap))
    assert [(f.register, f.bits) for f in model.failures] == [("ip.GAIN", (0,))]
    with pytest.raises(RegModelError):
        run(k, reg_write(gain, 1 << 32, amap))


def test_error_response_is_recorded_not_raised():
    k, model, amap, hw = setup()
    hw.defs.pop(0x4)
    seen = []
    model.listeners.append(seen.append)
    assert run(k, reg_write(model.lookup("ip.GAIN"), 1, amap)) is False
    assert run(k, reg_read(model.lookup("ip.GAIN"), amap)) is None
    assert [f.kind for f in seen] == ["access", "access"]


def test_predictor_path_without_auto_predict():
    k, model, amap, hw = setup()
    amap.auto_predict = False
    gain = model.lookup("ip.GAIN")
    run(k, reg_write(gain, 0x77, amap))
    assert gain.mirror == 0x10
    for kind, addr, data in hw.log:
        model.predict(amap, kind, addr, data)
    assert gain.mirror == 0x77
    assert model.predict(amap, "read", 0x999, 0) is None


def _builtins(k, model, amap, seed=1):
    seqs = [reset_check_seq(model, amap), bitbash_seq(model, amap),
            write_read_all_seq(model, amap, Rng(seed))]
    for s in seqs:
        run(k, s.start(None))
    return seqs


def test_builtins_pass_on_correct_hardware():
    k, model, amap, hw = setup()
    seqs = _builtins(k, model, amap)
    assert all(not s.failures for s in seqs)
    assert seqs[1].verdicts == {"ip.CTRL": True, "ip.GAIN": True}
    assert seqs[1].accesses["write"] == 2 * (1 + 3) + 2 * 8


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([0x0, 0x4]), st.integers(0, 7))
def test_bitbash_names_exactly_the_stuck_bit(addr, bit):
    d = {0x0: defs()[0], 0x4: defs()[1]}[addr]
    rw_bits = [b for b in range(32) if d.mask_of("RW") >> b & 1]
    stuck = rw_bits[bit % len(rw_bits)]
    k, model, amap, hw = setup(stuck={addr: 1 << stuck})
    seq = bitbash_seq(model, amap)
    run(k, seq.start(None))
    named = {m.split(" bit ")[1].split(":")[0] for _, m in seq.failures}
    assert named == {str(stuck)}
    assert {c for c, _ in seq.failures} == {"bitbash"}


def test_reset_check_names_the_bad_field():
    k, model, amap, hw = setup(reset_override={0x4: 0x00})
    seq = reset_check_seq(model, amap)
    run(k, seq.start(None))
    assert len(seq.failures) == 1
    assert seq.failures[0][1].endswith("(fields GAIN)")
    assert seq.verdicts["ip.GAIN"] is False and seq.verdicts["ip.CTRL"] is True


def test_block_filter():
    k, model, amap, hw = setup()
    seq = reset_check_seq(model, amap, block="other")
    run(k, seq.start(None))
    assert seq.verdicts == {}
