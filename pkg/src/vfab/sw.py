"""Software in the loop: test programs, the core model, the VRI mailbox and
randomized software-function calls.

A :class:`CoreModel` stands where a CPU would be: it masters the SoC register
bus and interprets :class:`TestProgram` statements one at a time.  Programs
only know the software API (register names, interrupt lines, mailbox
commands) and never touch testbench objects.

The VRI mailbox is an address-mapped block through which such a program asks
the testbench to run a sequence::

    +0x00 DOORBELL  write 1 to start CMD
    +0x04 CMD
    +0x08 STATUS    0 idle, 1 busy, 2 done, 3 error
    +0x0C RET       reading it in done/error returns STATUS to idle
    +0x10 ARG0 .. +0x2C ARG7
"""

from __future__ import annotations

import itertools
import shlex
from dataclasses import dataclass, field

from .regmodel import FieldDef, RegisterDef, RegModelError
from .seq import Constraint, Range, SequenceError, randomize, run_sequence
from .sim import First, Queue, RisingEdge, Timer, wait_cycles
from .tb import Component
from .uvcs.srb import DEFAULT_TIMEOUT, BusTxn, SrbSlave, srb_transfer, wait_reset_release

IDLE, BUSY, DONE, ERROR = 0, 1, 2, 3
STATUS_NAMES = {IDLE: "idle", BUSY: "busy", DONE: "done", ERROR: "error"}
# every STATUS change the mailbox may make
STATUS_EDGES = frozenset({(IDLE, BUSY), (IDLE, ERROR), (BUSY, DONE), (BUSY, ERROR),
                          (DONE, IDLE), (ERROR, IDLE)})
NUM_ARGS = 8
POLL_INTERVAL = 16

DOORBELL, CMD, STATUS, RET, ARG0 = 0x00, 0x04, 0x08, 0x0C, 0x10


class ProgramError(Exception):
    pass


class VriError(Exception):
    pass


class GsaError(Exception):
    pass


def vri_register_defs():
    word = lambda access: (FieldDef("VALUE", 0, 32, access),)
    defs = [
        RegisterDef("DOORBELL", DOORBELL, (FieldDef("RING", 0, 1, "WO"),)),
        RegisterDef("CMD", CMD, word("RW")),
        RegisterDef("STATUS", STATUS, (FieldDef("STATE", 0, 2, "RO"),)),
        RegisterDef("RET", RET, word("RO")),
    ]
    defs += [RegisterDef(f"ARG{i}", ARG0 + 4 * i, word("RW")) for i in range(NUM_ARGS)]
    return defs


# -- mailbox protocol ------------------------------------------------------------------


class Mailbox:
    """STATUS state machine of the mailbox, independent of any bus.

    ``running`` tracks whether a command's sequence is still executing; a
    doorbell during that time flags an error without disturbing it.
    """

    def __init__(self):
        self.status = IDLE
        self.running = False
        self.ret = 0
        self.history = [IDLE]

    def _set(self, status):
        if status != self.status:
            self.status = status
            self.history.append(status)

    def ring(self, valid):
        """Doorbell.  Returns True when a command should be started."""
        if self.status == BUSY:
            self._set(ERROR)
            return False
        if self.status != IDLE:
            return False
        if not valid:
            self._set(ERROR)
            return False
        self.running = True
        self._set(BUSY)
        return True

    def complete(self, ok, ret=0):
        if not self.running:
            return
        self.running = False
        self.ret = ret & 0xFFFF_FFFF
        if self.status == BUSY:
            self._set(DONE if ok else ERROR)

    def read_ret(self):
        if self.status in (DONE, ERROR) and not self.running:
            self._set(IDLE)
        return self.ret


@dataclass(frozen=True)
class VriCommand:
    cmd_id: int
    name: str
    factory: object
    schema: tuple = ()
    sequencer: str | None = None

    def check_args(self, args):
        for i, (rng, value) in enumerate(zip(self.schema, args)):
            if value not in rng:
                return f"{self.name} argument {i} = {value} outside [{rng.lo}..{rng.hi}]"
        return None


class VriCommandTable:
    def __init__(self):
        self.commands = {}

    def __contains__(self, cmd_id):
        return cmd_id in self.commands

    def get(self, cmd_id):
        return self.commands.get(cmd_id)

    def by_name(self, name):
        for c in self.commands.values():
            if c.name == name:
                return c
        return None

    def names(self):
        return {c.name: c.cmd_id for c in self.commands.values()}


def register_vri_handler(table, cmd_id, factory, schema=(), name=None, sequencer=None):
    """``factory(*args)`` returns the sequence to run on ``sequencer`` (a
    path relative to the env); its body's return value becomes RET."""
    if cmd_id in table.commands:
        raise VriError(f"VRI command id {cmd_id:#x} already registered")
    if not 0 <= cmd_id < 1 << 32:
        raise VriError(f"VRI command id {cmd_id} does not fit 32 bits")
    schema = tuple(r if isinstance(r, Range) else Range(*r) for r in schema)
    if len(schema) > NUM_ARGS:
        raise VriError(f"VRI command takes at most {NUM_ARGS} arguments")
    cmd = VriCommand(cmd_id, name or f"cmd{cmd_id:#x}", factory, schema, sequencer)
    table.commands[cmd_id] = cmd
    return cmd


class VriMailbox(Component):
    """Testbench side of the mailbox, answering on its own SRB port.

    Config: ``vif`` (the SRB bus), ``commands`` (a :class:`VriCommandTable`)
    and ``env`` (the component sequencer paths are relative to).
    """

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.box = Mailbox()
        self.regs = {CMD: 0, **{ARG0 + 4 * i: 0 for i in range(NUM_ARGS)}}
        self.calls = []

    def build_phase(self):
        self.vif = self.get_config("vif")
        self.table = self.get_config("commands") or VriCommandTable()
        self.env = self.get_config("env") or self.parent

    def run_phase(self):
        if self.vif is None:
            return None
        self.slave = SrbSlave(self.vif, self.access)
        return self._serve()

    def _serve(self):
        yield from wait_reset_release(self.vif)
        while True:
            yield RisingEdge(self.vif.clk)
            self.slave.step()

    def access(self, kind, addr, wdata):
        if addr % 4 or addr > ARG0 + 4 * (NUM_ARGS - 1):
            return False, 0
        if kind == "read":
            if addr == STATUS:
                return True, self.box.status
            if addr == RET:
                return True, self.box.read_ret()
            if addr == DOORBELL:
                return True, 0
            return True, self.regs[addr]
        if addr == DOORBELL:
            if wdata & 1:
                self._ring()
        elif addr in self.regs:
            self.regs[addr] = wdata
        return True, 0

    def _ring(self):
        cmd = self.table.get(self.regs[CMD])
        args = [self.regs[ARG0 + 4 * i] for i in range(NUM_ARGS)]
        problem = None
        if cmd is None:
            problem = f"unknown VRI command {self.regs[CMD]:#x}"
        else:
            args = args[:len(cmd.schema)]
            problem = cmd.check_args(args)
        started = self.box.ring(problem is None)
        self.calls.append((self.regs[CMD], tuple(args), started, problem))
        if started:
            self.spawn(self._execute(cmd, args), f"cmd{len(self.calls)}")
        elif problem is not None:
            self.ctx.bump("vri.rejected")

    def _execute(self, cmd, args):
        ok, ret = True, 0
        try:
            seq = cmd.factory(*args)
            sqr = f"{self.env.path}.{cmd.sequencer}" if cmd.sequencer else None
            ret = yield from run_sequence(seq, sqr, owner=self.env) if sqr else seq.start(None, owner=self.env)
            ok = not seq.failures
        except SequenceError as exc:
            self.error("vri_sequence", f"{cmd.name}: {exc}")
            ok = False
        self.box.complete(ok, ret or 0)


# -- test programs ----------------------------------------------------------------------

OPS = {"w": (2, 2), "r": (1, 2), "irqwait": (2, 2), "vri": (1, 1 + NUM_ARGS), "set": (2, 2),
       "wait": (1, 1)}


@dataclass(frozen=True)
class Statement:
    op: str
    args: tuple
    line: int = 0

    def __str__(self):
        return " ".join((self.op,) + self.args)


@dataclass(frozen=True)
class TestProgram:
    name: str
    body: tuple

    def __len__(self):
        return len(self.body)


def parse_program(text, name="program"):
    """One statement per line: ``w NAME VAL``, ``r NAME [EXPECT]``,
    ``irqwait LINE CYCLES``, ``vri CMD ARGS...``, ``set VAR VAL``,
    ``wait CYCLES``.  ``#`` starts a comment."""
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        try:
            words = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ProgramError(f"{name}:{lineno}: {exc}") from None
        if not words:
            continue
        op, args = words[0], tuple(words[1:])
        if op not in OPS:
            raise ProgramError(f"{name}:{lineno}: unknown statement {op!r}")
        lo, hi = OPS[op]
        if not lo <= len(args) <= hi:
            raise ProgramError(f"{name}:{lineno}: {op} takes {lo}..{hi} operands, got {len(args)}")
        body.append(Statement(op, args, lineno))
    return TestProgram(name, tuple(body))


def program(name, *statements):
    return parse_program("\n".join(statements), name)


@dataclass
class ProgramResult:
    status: int
    failure: str | None = None
    reads: list = field(default_factory=list)
    vri: list = field(default_factory=list)


class _Abort(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class CoreModel(Component):
    """Bus master executing test programs in order.

    Config: ``vif`` (master SRB bus), ``regmodel`` and ``regmap`` (for names),
    ``irq_lines`` (list of signals), ``symbols`` (extra name to number table
    for operands) and ``vri_commands`` (command name to id).
    """

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.vars = {}
        self.results = []
        self.busy = False

    def build_phase(self):
        self.vif = self.get_config("vif")
        self.regmodel = self.get_config("regmodel")
        self.regmap = self.get_config("regmap")
        self.irq_lines = list(self.get_config("irq_lines", []))
        self.symbols = dict(self.get_config("symbols", {}))
        self.vri_commands = dict(self.get_config("vri_commands", {}))
        self.vri_base = self.get_config("vri_base")
        self.timeout = self.get_config("timeout", DEFAULT_TIMEOUT)
        self.poll = self.get_config("poll_interval", POLL_INTERVAL)

    def run_phase(self):
        self.queue = Queue(self.kernel)
        return self._serve()

    def _serve(self):
        yield from wait_reset_release(self.vif)
        while True:
            prog, done = yield from self.queue.get()
            result = yield from self._run(prog)
            done.set_result(result)

    def execute(self, prog):
        """Queue ``prog`` on the core and wait for its :class:`ProgramResult`."""
        done = self.kernel.future()
        self.queue.put((prog, done))
        return (yield done)

    # operand resolution
    def value(self, token):
        if token in self.vars:
            return self.vars[token]
        if token in self.symbols:
            return self.symbols[token]
        try:
            return int(token, 0) & 0xFFFF_FFFF
        except ValueError:
            raise _Abort("sw_program", f"cannot evaluate operand {token!r}") from None

    def address(self, token):
        if token[:1].isdigit():
            return self.value(token)
        try:
            return self.regmap.address_of(self.regmodel.lookup(token))
        except RegModelError as exc:
            raise _Abort("sw_program", str(exc)) from None

    # bus primitives
    def bus(self, kind, addr, data=0):
        txn = yield from srb_transfer(self.vif, BusTxn(kind, addr, data), self.timeout)
        if txn.resp != "ok":
            why = "timed out" if txn.timed_out else "error response"
            raise _Abort("sw_bus_error", f"{kind} {addr:#010x}: {why}")
        return txn.rdata

    def reg_write(self, target, value):
        yield from self.bus("write", self.address(target) if isinstance(target, str) else target, value)

    def reg_read(self, target):
        return (yield from self.bus("read", self.address(target) if isinstance(target, str) else target))

    def wait_irq(self, line, cycles):
        if not 0 <= line < len(self.irq_lines):
            raise _Abort("sw_program", f"no interrupt line {line}")
        sig = self.irq_lines[line]
        if sig.value:
            return
        timer = Timer(max(1, cycles) * self.get_config("clock_period", 10))
        trig, _ = yield First(RisingEdge(sig), timer)
        if trig is timer:
            raise _Abort("sw_irq_timeout", f"interrupt line {line} not asserted within {cycles} cycles")

    def vri_call(self, cmd, args):
        if self.vri_base is None:
            raise _Abort("sw_program", "no VRI mailbox on this platform")
        if len(args) > NUM_ARGS:
            raise _Abort("sw_program", f"VRI call with {len(args)} arguments (max {NUM_ARGS})")
        base = self.vri_base
        status = yield from self.bus("read", base + STATUS)
        if status != IDLE:
            raise _Abort("sw_vri_error", f"mailbox not idle ({STATUS_NAMES.get(status, status)}) before call")
        for i, a in enumerate(args):
            yield from self.bus("write", base + ARG0 + 4 * i, a)
        yield from self.bus("write", base + CMD, cmd)
        yield from self.bus("write", base + DOORBELL, 1)
        while True:
            status = yield from self.bus("read", base + STATUS)
            if status in (DONE, ERROR):
                break
            yield from wait_cycles(self.vif.clk, self.poll)
        ret = yield from self.bus("read", base + RET)
        return status, ret

    def _run(self, prog):
        self.busy = True
        result = ProgramResult(0)
        try:
            for st in prog.body:
                yield from self._step(st, result)
        except _Abort as exc:
            result.status = 1
            result.failure = f"{prog.name}:{st.line}: {st}: {exc}"
            self.error(exc.code, result.failure)
        self.busy = False
        self.results.append(result)
        return result

    def _step(self, st, result):
        op, a = st.op, st.args
        if op == "w":
            yield from self.reg_write(a[0], self.value(a[1]))
        elif op == "r":
            data = yield from self.reg_read(a[0])
            self.vars["_"] = data
            result.reads.append((a[0], data))
            if len(a) > 1 and data != self.value(a[1]):
                raise _Abort("sw_check", f"read {data:#x}, expected {self.value(a[1]):#x}")
        elif op == "irqwait":
            yield from self.wait_irq(self.value(a[0]), self.value(a[1]))
        elif op == "vri":
            cmd = self.vri_commands.get(a[0])
            cmd = self.value(a[0]) if cmd is None else cmd
            status, ret = yield from self.vri_call(cmd, [self.value(x) for x in a[1:]])
            self.vars["ret"] = ret
            result.vri.append((cmd, status, ret))
            if status != DONE:
                raise _Abort("sw_vri_error", f"mailbox status {STATUS_NAMES.get(status, status)}")
        elif op == "set":
            self.vars[a[0]] = self.value(a[1])
        elif op == "wait":
            yield from wait_cycles(self.vif.clk, self.value(a[0]))


# -- randomized software calls ----------------------------------------------------------


@dataclass(frozen=True)
class SwFunctionDecl:
    """A software routine callable with randomized parameters.

    ``params`` maps parameter names to domains; ``body(**params)`` returns
    the :class:`TestProgram` implementing the call; ``variables`` maps
    software variable names to no-argument samplers.
    """

    name: str
    params: dict
    body: object
    variables: dict = field(default_factory=dict)
    predicates: tuple = ()


@dataclass(frozen=True)
class InvocationRecord:
    function: str
    params: dict
    status: int
    ret: int | None
    variables: dict


class GsaAdapter:
    """Draws parameters, queues the call on the core, samples coverage."""

    def __init__(self, core, groups=()):
        self.core = core
        self.functions = {}
        self.groups = list(groups)
        self.records = []

    def declare(self, fn):
        if fn.name in self.functions:
            raise GsaError(f"software function {fn.name} already declared")
        self.functions[fn.name] = fn
        return fn

    def call(self, name, rng):
        fn = self.functions.get(name)
        if fn is None:
            raise GsaError(f"software function {name!r} was not declared")
        params = randomize({}, Constraint(fn.params, list(fn.predicates)), rng)
        result = yield from self.core.execute(fn.body(**params))
        variables = {k: sample() for k, sample in fn.variables.items()}
        record = InvocationRecord(name, params, result.status, self.core.vars.get("ret"), variables)
        self.records.append(record)
        for g in self.groups:
            g.sample({**params, **variables})
        return record


def gsa_call(adapter, name, rng):
    return adapter.call(name, rng)


def mailbox_traces(length):
    """Every operation sequence of exactly ``length`` steps."""
    ops = ("ring_ok", "ring_bad", "complete_ok", "complete_err", "read_ret")
    return itertools.product(ops, repeat=length)


def apply_op(box, op):
    if op == "ring_ok":
        box.ring(True)
    elif op == "ring_bad":
        box.ring(False)
    elif op == "complete_ok":
        box.complete(True, 1)
    elif op == "complete_err":
        box.complete(False, 0)
    elif op == "read_ret":
        box.read_ret()
    else:
        raise ValueError(op)
