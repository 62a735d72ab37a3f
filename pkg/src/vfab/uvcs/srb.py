"""SRB: the simple register bus.

One outstanding transaction, no bursts.  Cycle contract, all sampled on the
rising edge of ``clk``:

* the master drives ``req=1`` with ``we``, ``addr`` and ``wdata``;
* the slave answers with ``ack=1`` for exactly one cycle, ``rdata`` valid on
  reads and ``err`` set on a failed access;
* the master drops ``req`` on the cycle it samples ``ack``.

A write acknowledged on the first possible edge completes two cycles after
``req`` was raised.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..regmodel import BusAdapter
from ..sim import RisingEdge
from ..tb import Agent, Driver, Monitor

DEFAULT_TIMEOUT = 64


class BusTxnError(Exception):
    pass


@dataclass
class BusTxn:
    kind: str
    addr: int
    wdata: int = 0
    rdata: int = 0
    resp: str | None = None
    issue_time: int | None = None
    complete_time: int | None = None
    timed_out: bool = False

    def __post_init__(self):
        if self.kind not in ("read", "write"):
            raise BusTxnError(f"unknown transaction kind {self.kind!r}")
        for name in ("addr", "wdata", "rdata"):
            if not 0 <= getattr(self, name) < 1 << 32:
                raise BusTxnError(f"{name} {getattr(self, name):#x} does not fit 32 bits")

    def complete(self, resp, time, rdata=0):
        if self.resp is not None:
            raise BusTxnError("transaction response already set")
        self.resp = resp
        self.rdata = rdata
        self.complete_time = time

    def content(self):
        """Fields that identify the access independent of timing."""
        data = self.wdata if self.kind == "write" else self.rdata
        return (self.kind, self.addr, data, self.resp)

    def __str__(self):
        data = self.wdata if self.kind == "write" else self.rdata
        return f"{self.kind[0].upper()} {self.addr:#010x} {data:#010x} {self.resp}"


@dataclass
class SrbBus:
    clk: object
    rst_n: object
    req: object
    we: object
    addr: object
    wdata: object
    ack: object
    rdata: object
    err: object

    @classmethod
    def create(cls, kernel, prefix, clk, rst_n):
        s = kernel.signal
        return cls(clk, rst_n,
                   req=s(f"{prefix}.req"), we=s(f"{prefix}.we"),
                   addr=s(f"{prefix}.addr", 32), wdata=s(f"{prefix}.wdata", 32),
                   ack=s(f"{prefix}.ack"), rdata=s(f"{prefix}.rdata", 32),
                   err=s(f"{prefix}.err"))

    def signals(self):
        return [self.req, self.we, self.addr, self.wdata, self.ack, self.rdata, self.err]


def wait_reset_release(bus):
    while not bus.rst_n.value:
        yield RisingEdge(bus.rst_n)


def srb_transfer(bus, txn, timeout=DEFAULT_TIMEOUT):
    """Master side of one SRB transaction; fills in and returns ``txn``."""
    clk = bus.clk
    yield RisingEdge(clk)
    kernel = clk.kernel
    txn.issue_time = kernel.now
    write = txn.kind == "write"
    bus.addr.drive(txn.addr)
    bus.we.drive(1 if write else 0)
    bus.wdata.drive(txn.wdata if write else 0)
    bus.req.drive(1)
    for _ in range(timeout):
        yield RisingEdge(clk)
        if bus.ack.value:
            bus.req.drive(0)
            txn.complete("error" if bus.err.value else "ok", kernel.now,
                         0 if write else bus.rdata.value)
            return txn
    bus.req.drive(0)
    txn.timed_out = True
    txn.complete("error", kernel.now)
    return txn


class SrbSlave:
    """Slave half of the handshake for cycle-level models.

    Call :meth:`step` once per rising edge.  ``handler(kind, addr, wdata)``
    returns ``(ok, rdata)``, or None to leave the request unanswered.
    """

    def __init__(self, bus, handler):
        self.bus = bus
        self.handler = handler
        self.acking = False

    def step(self):
        bus = self.bus
        if self.acking:
            bus.ack.drive(0)
            bus.err.drive(0)
            self.acking = False
            return None
        if not bus.req.value:
            return None
        kind = "write" if bus.we.value else "read"
        answer = self.handler(kind, bus.addr.value, bus.wdata.value)
        if answer is None:
            return None
        ok, rdata = answer
        bus.ack.drive(1)
        bus.err.drive(0 if ok else 1)
        bus.rdata.drive(rdata if kind == "read" and ok else 0)
        self.acking = True
        return kind


class SrbDriver(Driver):
    timeout = DEFAULT_TIMEOUT

    def _serve(self):
        self.timeout = self.get_config("timeout", DEFAULT_TIMEOUT)
        yield from wait_reset_release(self.vif)
        yield from super()._serve()

    def drive_item(self, txn):
        yield from srb_transfer(self.vif, txn, self.timeout)
        if txn.timed_out:
            self.error("srb_timeout", f"no ack within {self.timeout} cycles for {txn}")
        return txn


class SrbMonitor(Monitor):
    """Rebuilds transactions from the wires alone."""

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.observed = []

    def run_phase(self):
        if self.vif is None:
            return None
        return self._sample()

    def _sample(self):
        bus = self.vif
        clk = bus.clk
        kernel = clk.kernel
        while True:
            yield RisingEdge(clk)
            if not bus.rst_n.value:
                continue
            req = bus.req.value
            ack = bus.ack.value
            if not ack:
                continue
            if not req:
                self.error("srb_protocol", "ack asserted without a pending request")
                continue
            kind = "write" if bus.we.value else "read"
            txn = BusTxn(kind, bus.addr.value, bus.wdata.value if kind == "write" else 0,
                         issue_time=bus.req.last_change)
            txn.complete("error" if bus.err.value else "ok", kernel.now,
                         bus.rdata.value if kind == "read" else 0)
            self.observed.append(txn)
            self.ap.write(txn)


class SrbAgent(Agent):
    driver_cls = SrbDriver
    monitor_cls = SrbMonitor


class SrbAdapter(BusAdapter):
    def reg2bus(self, kind, addr, data):
        return BusTxn(kind, addr, data if kind == "write" else 0)

    def bus2reg(self, txn):
        return txn.resp == "ok", txn.rdata


class SrbInterconnect:
    """Address decoder bridging one upstream SRB port to several downstream ones.

    ``regions`` is a list of ``(base, size, bus)``; accesses outside every
    region are answered with ``err``.
    """

    def __init__(self, kernel, upstream, regions, name="interconnect", timeout=DEFAULT_TIMEOUT):
        self.kernel = kernel
        self.up = upstream
        self.regions = sorted(regions, key=lambda r: r[0])
        self.name = name
        self.timeout = timeout
        self.decode_errors = 0

    def decode(self, addr):
        for base, size, bus in self.regions:
            if base <= addr < base + size:
                return base, bus
        return None

    def start(self):
        return self.kernel.spawn(self._run(), self.name)

    def _run(self):
        up = self.up
        clk = up.clk
        while True:
            yield RisingEdge(clk)
            if up.ack.value:
                up.ack.drive(0)
                up.err.drive(0)
                continue
            if not up.req.value or not up.rst_n.value:
                continue
            kind = "write" if up.we.value else "read"
            target = self.decode(up.addr.value)
            if target is None:
                self.decode_errors += 1
                up.err.drive(1)
                up.rdata.drive(0)
                up.ack.drive(1)
                continue
            base, bus = target
            txn = BusTxn(kind, up.addr.value - base, up.wdata.value if kind == "write" else 0)
            yield from srb_transfer(bus, txn, self.timeout)
            up.err.drive(0 if txn.resp == "ok" else 1)
            up.rdata.drive(txn.rdata if kind == "read" else 0)
            up.ack.drive(1)
