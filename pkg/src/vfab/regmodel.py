"""Register abstraction layer: fields, registers, blocks, address maps and mirrors.

Registers are addressed by name (``"ganc.GAIN"``); addresses only exist
relative to an :class:`AddressMap`, so the same register instance can sit at
different absolute addresses in an IP-level and an SoC-level map.  Every
frontdoor access goes through the map's :class:`BusAdapter`.

Mirrors are updated either by the frontdoor call itself (``auto_predict``) or
by a predictor fed from a bus monitor, which is how self-checking keeps
working when the traffic comes from something other than the testbench.
"""

from __future__ import annotations

import difflib
import logging
from dataclasses import dataclass

from .seq import Sequence
from .sim import Lock

log = logging.getLogger(__name__)

REG_WIDTH = 32
REG_MASK = (1 << REG_WIDTH) - 1
ACCESS_TYPES = ("RW", "RO", "W1C", "WO")


class RegModelError(Exception):
    pass


class RegisterLookupError(RegModelError, KeyError):
    def __str__(self):
        return self.args[0]


class MapError(RegModelError):
    pass


@dataclass(frozen=True)
class FieldDef:
    name: str
    lsb: int
    width: int
    access: str = "RW"
    reset: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise RegModelError(f"field {self.name}: width must be >= 1")
        if self.lsb < 0 or self.lsb + self.width > REG_WIDTH:
            raise RegModelError(
                f"field {self.name}: bits [{self.lsb + self.width - 1}:{self.lsb}] exceed bit {REG_WIDTH - 1}")
        if self.access not in ACCESS_TYPES:
            raise RegModelError(f"field {self.name}: unknown access {self.access!r}")
        if not 0 <= self.reset < (1 << self.width):
            raise RegModelError(f"field {self.name}: reset {self.reset:#x} does not fit {self.width} bits")

    @property
    def mask(self):
        return ((1 << self.width) - 1) << self.lsb

    @property
    def msb(self):
        return self.lsb + self.width - 1

    def extract(self, value):
        return (value >> self.lsb) & ((1 << self.width) - 1)


@dataclass(frozen=True)
class RegisterDef:
    name: str
    offset: int
    fields: tuple = ()
    width: int = REG_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(sorted(self.fields, key=lambda f: f.lsb)))
        if self.width != REG_WIDTH:
            raise RegModelError(f"register {self.name}: width {self.width} unsupported (only {REG_WIDTH})")
        if self.offset % 4:
            raise RegModelError(f"register {self.name}: offset {self.offset:#x} not 4-byte aligned")
        used = 0
        names = set()
        for f in self.fields:
            if f.mask & used:
                raise RegModelError(f"register {self.name}: field {f.name} overlaps another field")
            if f.name in names:
                raise RegModelError(f"register {self.name}: duplicate field {f.name}")
            used |= f.mask
            names.add(f.name)

    @property
    def reset_value(self):
        value = 0
        for f in self.fields:
            value |= f.reset << f.lsb
        return value

    def mask_of(self, *access):
        m = 0
        for f in self.fields:
            if f.access in access:
                m |= f.mask
        return m

    def field(self, name):
        for f in self.fields:
            if f.name == name:
                return f
        raise RegisterLookupError(f"register {self.name} has no field {name!r}")


@dataclass
class CheckFailure:
    register: str
    expected: int
    observed: int
    bits: tuple
    kind: str = "self_check"

    def __str__(self):
        bits = ", ".join(map(str, self.bits))
        return (f"{self.register}: expected {self.expected:#010x} observed {self.observed:#010x} "
                f"(bit{'s' if len(self.bits) != 1 else ''} {bits})")


def bit_list(mask):
    return tuple(i for i in range(REG_WIDTH) if mask >> i & 1)


class RegisterInstance:
    def __init__(self, defn, block):
        self.defn = defn
        self.block = block
        self.mirror = 0
        self.mirror_state = "unknown"

    def __repr__(self):
        return f"<Register {self.path} mirror={self.mirror:#x} ({self.mirror_state})>"

    @property
    def name(self):
        return self.defn.name

    @property
    def path(self):
        return f"{self.block.name}.{self.defn.name}"

    @property
    def model(self):
        return self.block.model

    def reset(self):
        self.mirror = self.defn.reset_value
        self.mirror_state = "known"

    def field_value(self, name):
        return self.defn.field(name).extract(self.mirror)

    def predict_write(self, value):
        d = self.defn
        keep = self.mirror & d.mask_of("RO")
        take = value & d.mask_of("RW", "WO")
        w1c = d.mask_of("W1C")
        cleared = self.mirror & w1c & ~value
        if not d.mask_of("RW", "WO", "W1C"):
            log.warning("write of %#x to read-only register %s ignored by mirror", value, self.path)
        self.mirror = keep | take | cleared
        self.mirror_state = "known"

    def predict_read(self, observed):
        """Update the mirror from a read; returns a :class:`CheckFailure` or None."""
        d = self.defn
        failure = None
        if self.mirror_state == "known":
            checked = d.mask_of("RW", "W1C")
            diff = (observed ^ self.mirror) & checked
            if diff:
                failure = CheckFailure(self.path, self.mirror & checked, observed & checked, bit_list(diff))
        readable = d.mask_of("RW", "W1C", "RO")
        self.mirror = (self.mirror & d.mask_of("WO")) | (observed & readable)
        self.mirror_state = "known"
        return failure

    def predict_field(self, name, value):
        """Set a field from a hardware-side event (e.g. an interrupt cause)."""
        f = self.defn.field(name)
        self.mirror = (self.mirror & ~f.mask) | ((value << f.lsb) & f.mask)

    # frontdoor
    def write(self, value, amap):
        return (yield from reg_write(self, value, amap))

    def read(self, amap):
        return (yield from reg_read(self, amap))


class RegisterBlock:
    def __init__(self, name, defs, model=None):
        self.name = name
        self.model = model
        self.registers = {}
        for d in sorted(defs, key=lambda r: r.offset):
            if d.name in self.registers:
                raise RegModelError(f"block {name}: duplicate register {d.name}")
            self.registers[d.name] = RegisterInstance(d, self)
        offsets = [r.defn.offset for r in self.registers.values()]
        if len(set(offsets)) != len(offsets):
            raise RegModelError(f"block {name}: two registers share an offset")

    def __iter__(self):
        return iter(self.registers.values())

    def __len__(self):
        return len(self.registers)


class AddressMap:
    """Places blocks (and nested maps) at offsets from ``base``."""

    def __init__(self, name, base=0, auto_predict=True):
        self.name = name
        self.base = base
        self.auto_predict = auto_predict
        self.blocks = []
        self.submaps = []
        self.parent = None
        self.adapter = None
        self._cache = None

    def __repr__(self):
        return f"<AddressMap {self.name} base={self.base:#x}>"

    def add_block(self, block, offset=0):
        self.blocks.append((block, offset))
        self._changed()
        return self

    def add_submap(self, amap, offset):
        amap.parent = self
        self.submaps.append((amap, offset))
        self._changed()
        return self

    def _changed(self):
        m = self
        while m is not None:
            m._cache = None
            m._table()
            m = m.parent

    def _relative(self):
        """``{relative address: instance}`` for everything under this map."""
        table = {}

        def put(addr, inst):
            other = table.get(addr)
            if other is not None:
                raise MapError(f"map {self.name}: {inst.path} and {other.path} both at {addr:#x}")
            table[addr] = inst

        for block, off in self.blocks:
            for inst in block:
                put(off + inst.defn.offset, inst)
        for sub, off in self.submaps:
            for addr, inst in sub._relative().items():
                put(off + addr, inst)
        return table

    def _table(self):
        if self._cache is None:
            table = {self.base + a: i for a, i in self._relative().items()}
            self._cache = (table, {id(i): a for a, i in table.items()})
        return self._cache

    def address_of(self, inst):
        try:
            return self._table()[1][id(inst)]
        except KeyError:
            raise MapError(f"{inst.path} is not mapped in {self.name}") from None

    def resolve(self, addr):
        return self._table()[0].get(addr)

    def registers(self):
        """Instances in ascending absolute address order."""
        table = self._table()[0]
        return [table[a] for a in sorted(table)]

    def get_adapter(self):
        m = self
        while m is not None:
            if m.adapter is not None:
                return m.adapter
            m = m.parent
        raise RegModelError(f"map {self.name} has no bus adapter bound")


class RegisterModel:
    def __init__(self, blocks=()):
        self.blocks = {}
        self.maps = {}
        self.failures = []
        self.listeners = []
        for b in blocks:
            self.add_block(b)

    @classmethod
    def from_ir(cls, ir):
        model = cls()
        for blk in ir.blocks:
            model.add_block(RegisterBlock(blk.name, blk.registers))
        return model

    def add_block(self, block):
        if block.name in self.blocks:
            raise RegModelError(f"duplicate block {block.name}")
        block.model = self
        self.blocks[block.name] = block
        return block

    def add_map(self, amap):
        self.maps[amap.name] = amap
        return amap

    def registers(self):
        for b in self.blocks.values():
            yield from b

    def lookup(self, name):
        block_name, _, reg_name = name.partition(".")
        block = self.blocks.get(block_name)
        inst = block.registers.get(reg_name) if block is not None else None
        if inst is None or "." in reg_name:
            known = [r.path for r in self.registers()]
            near = difflib.get_close_matches(name, known, n=3)
            hint = f"; did you mean {', '.join(near)}?" if near else ""
            raise RegisterLookupError(f"no register named {name!r}{hint}")
        return inst

    def field(self, path):
        """Resolve ``block.REG.FIELD`` to ``(instance, FieldDef)``."""
        reg_path, _, field_name = path.rpartition(".")
        inst = self.lookup(reg_path)
        return inst, inst.defn.field(field_name)

    def field_value(self, path):
        inst, f = self.field(path)
        return f.extract(inst.mirror)

    def reset(self):
        for inst in self.registers():
            inst.reset()

    def record(self, failure):
        self.failures.append(failure)
        for cb in self.listeners:
            cb(failure)

    def predict(self, amap, kind, addr, data):
        """Apply an observed access.  Returns the instance, or None if unmapped."""
        inst = amap.resolve(addr)
        if inst is None:
            return None
        if kind == "write":
            inst.predict_write(data)
        else:
            failure = inst.predict_read(data)
            if failure is not None:
                self.record(failure)
        return inst


def reset_model(model):
    model.reset()


def lookup(model, name):
    return model.lookup(name)


class BusAdapter:
    """Turns register reads/writes into items on one bus sequencer.

    Subclasses provide :meth:`reg2bus` and :meth:`bus2reg`.  Operations are
    serialised: at most one frontdoor access is in flight per adapter.
    """

    def __init__(self, sequencer):
        self.sequencer = sequencer
        self._lock = None

    def reg2bus(self, kind, addr, data):
        raise NotImplementedError

    def bus2reg(self, item):
        """Return ``(ok, data)`` for a completed item."""
        raise NotImplementedError

    def execute(self, kind, addr, data=0):
        if self._lock is None:
            self._lock = Lock(self.sequencer.kernel)
        yield from self._lock.acquire()
        try:
            item = self.reg2bus(kind, addr, data)
            done = yield from self.sequencer.execute(item)
        finally:
            self._lock.release()
        return self.bus2reg(done)


def reg_write(inst, value, amap):
    if not 0 <= value <= REG_MASK:
        raise RegModelError(f"value {value:#x} does not fit a {REG_WIDTH}-bit register")
    addr = amap.address_of(inst)
    ok, _ = yield from amap.get_adapter().execute("write", addr, value)
    if not ok:
        inst.model.record(CheckFailure(inst.path, value, 0, (), kind="access"))
        return False
    if amap.auto_predict:
        inst.predict_write(value)
    return True


def reg_read(inst, amap):
    addr = amap.address_of(inst)
    ok, data = yield from amap.get_adapter().execute("read", addr)
    if not ok:
        inst.model.record(CheckFailure(inst.path, 0, 0, (), kind="access"))
        return None
    if amap.auto_predict:
        failure = inst.predict_read(data)
        if failure is not None:
            inst.model.record(failure)
    return data


# -- built-in sequences ------------------------------------------------------


class RegSequence(Sequence):
    """Base for sequences that address registers by name only."""

    def __init__(self, name=None, model=None, amap=None, block=None):
        super().__init__(name)
        self.model = model
        self.amap = amap
        self.block = block
        self.verdicts = {}
        self.accesses = {"write": 0, "read": 0}

    def bind(self, **kw):
        super().bind(**kw)
        self.model = kw.get("model", self.model)
        self.amap = kw.get("amap", self.amap)
        return self

    def targets(self):
        """Registers of the map in address order, limited to ``block`` if set."""
        return [i for i in self.amap.registers() if self.block is None or i.block.name == self.block]

    def write(self, name, value):
        inst = self.model.lookup(name) if isinstance(name, str) else name
        self.accesses["write"] += 1
        return (yield from reg_write(inst, value, self.amap))

    def read(self, name):
        inst = self.model.lookup(name) if isinstance(name, str) else name
        self.accesses["read"] += 1
        return (yield from reg_read(inst, self.amap))

    def _verdict(self, inst, ok):
        self.verdicts[inst.path] = self.verdicts.get(inst.path, True) and ok


class ResetCheckSeq(RegSequence):
    """Read every register and compare readable fields with their reset values."""

    code = "reset_check"

    def body(self):
        for inst in self.targets():
            d = inst.defn
            readable = d.mask_of("RW", "RO", "W1C")
            observed = yield from self.read(inst)
            if observed is None:
                self._verdict(inst, False)
                continue
            diff = (observed ^ d.reset_value) & readable
            self._verdict(inst, not diff)
            if diff:
                names = [f.name for f in d.fields if f.mask & diff]
                self.fail(self.code, f"{inst.path} reset value mismatch: expected "
                          f"{d.reset_value & readable:#x} observed {observed & readable:#x} "
                          f"(fields {', '.join(names)})")


class BitBashSeq(RegSequence):
    """Walk a one and then a zero through every bit of every RW field.

    Other writable fields keep the value read back before the walk starts.
    """

    code = "bitbash"

    def body(self):
        for inst in self.targets():
            d = inst.defn
            rw_fields = [f for f in d.fields if f.access == "RW"]
            if not rw_fields:
                continue
            start = yield from self.read(inst)
            if start is None:
                self._verdict(inst, False)
                continue
            for f in rw_fields:
                background = start & d.mask_of("RW") & ~f.mask
                full = (1 << f.width) - 1
                patterns = [(i, 1 << i) for i in range(f.width)]
                patterns += [(i, full & ~(1 << i)) for i in range(f.width)]
                for bit, pattern in patterns:
                    yield from self.write(inst, background | (pattern << f.lsb))
                    observed = yield from self.read(inst)
                    if observed is None:
                        self._verdict(inst, False)
                        continue
                    got = f.extract(observed)
                    ok = got == pattern
                    self._verdict(inst, ok)
                    if not ok:
                        bad = ", ".join(str(b + f.lsb) for b in bit_list(got ^ pattern))
                        self.fail(self.code, f"{inst.path}.{f.name} bit {bad}: wrote "
                                  f"{pattern:#x} read {got:#x} (walking bit {bit + f.lsb})")


class WriteReadAllSeq(RegSequence):
    """Write seeded random values to RW fields and read them back."""

    code = "write_read"

    def body(self):
        for inst in self.targets():
            rw = inst.defn.mask_of("RW")
            if not rw:
                continue
            value = self.rng.getrandbits(REG_WIDTH) & rw
            yield from self.write(inst, value)
            observed = yield from self.read(inst)
            if observed is None:
                self._verdict(inst, False)
                continue
            ok = (observed & rw) == value
            self._verdict(inst, ok)
            if not ok:
                self.fail(self.code, f"{inst.path}: wrote {value:#x} read {observed & rw:#x} "
                          f"(bits {', '.join(map(str, bit_list((observed ^ value) & rw)))})")


def reset_check_seq(model, amap, block=None):
    return ResetCheckSeq("reset_check", model, amap, block)


def bitbash_seq(model, amap, block=None):
    return BitBashSeq("bitbash", model, amap, block)


def write_read_all_seq(model, amap, rng=None, block=None):
    seq = WriteReadAllSeq("write_read_all", model, amap, block)
    seq.rng = rng
    return seq
