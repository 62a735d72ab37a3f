"""Deterministic discrete-event simulation kernel.

Time is a non-negative integer tick count (1 tick = 1 ns by convention).
Events are ordered by ``(fire_time, seq_no)`` where ``seq_no`` is a global
insertion ordinal, so events scheduled for the same timestep run in the
order they were scheduled.  There are no delta cycles: a ``drive`` with zero
delay becomes visible later in the same timestep, after every event that was
already queued for it.  Processes that resume on the same clock edge
therefore all sample pre-edge values, which is what the cycle-level models
in this package rely on.

Processes are plain generators that yield triggers::

    def proc():
        yield RisingEdge(clk)
        yield Timer(20)
        value = yield some_future

    kernel.spawn(proc(), "tb.proc")
    kernel.run_until(1000)
"""

from __future__ import annotations

import hashlib
import heapq
from collections import deque
from functools import partial

MAX_TICKS = 1 << 63
DEFAULT_CLOCK_PERIOD = 10


class SimError(Exception):
    pass


class WidthError(SimError, ValueError):
    """A value does not fit the width of the signal it is driven onto."""


class Kernel:
    """Event queue, simulated time and process bookkeeping for one run."""

    def __init__(self, trace=False, log=None):
        self.now = 0
        self._queue = []
        self._seq = 0
        self._stop = False
        self._hash = hashlib.sha256() if trace else None
        self._log = log
        self.processes = []
        self.current = None
        self.executed = 0

    # -- scheduling -------------------------------------------------------

    def schedule(self, action, delay=0, label="cb"):
        """Run ``action()`` at ``now + delay``; returns the event id."""
        if delay < 0:
            raise SimError(f"negative delay {delay}")
        t = self.now + delay
        if t >= MAX_TICKS:
            raise SimError(f"event time {t} exceeds supported range")
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._queue, (t, seq, action, label))
        return seq

    def stop(self):
        """Halt ``run_until`` after the currently running action."""
        self._stop = True

    def pending(self):
        return len(self._queue)

    def run_until(self, limit):
        """Execute every event with ``fire_time <= limit``.

        Returns the time of the last executed event, or the current time if
        nothing ran.  Time never advances past the last executed event.
        """
        self._stop = False
        queue = self._queue
        hasher = self._hash
        log = self._log
        while queue and not self._stop:
            if queue[0][0] > limit:
                break
            t, seq, action, label = heapq.heappop(queue)
            self.now = t
            self.executed += 1
            if hasher is not None:
                line = f"{t}:{seq}:{label}\n"
                hasher.update(line.encode())
                if log is not None:
                    log.append(line[:-1]) if isinstance(log, list) else log.write(line)
            action()
        return self.now

    @property
    def trace_hash(self):
        return self._hash.hexdigest() if self._hash is not None else None

    # -- factories --------------------------------------------------------

    def spawn(self, gen, name="proc"):
        proc = Process(self, gen, name)
        self.processes.append(proc)
        self.schedule(proc._start, 0, name)
        return proc

    def signal(self, name, width=1, value=0):
        return Signal(self, name, width, value)

    def event(self, name="event"):
        return SimEvent(self, name)

    def future(self):
        return Future(self)

    def suspended(self):
        """Live processes and what each one is waiting on."""
        return [(p.name, describe(p.waiting_on)) for p in self.processes if p.alive]


class Process:
    """A generator driven by the kernel.

    Every suspension gets a fresh token; a trigger only resumes the process if
    it still holds the current token.  That is how ``First`` discards the
    triggers that lost the race.
    """

    def __init__(self, kernel, gen, name):
        self.kernel = kernel
        self.gen = gen
        self.name = name
        self.alive = True
        self.waiting_on = None
        self.result = None
        self.finished = Future(kernel)
        self._token = 0

    def __repr__(self):
        return f"<Process {self.name} {'alive' if self.alive else 'done'}>"

    def _start(self):
        self._step(None)

    def _step(self, value):
        kernel = self.kernel
        prev = kernel.current
        kernel.current = self
        try:
            trig = self.gen.send(value)
        except StopIteration as stop:
            self.alive = False
            self.waiting_on = None
            self.result = stop.value
            self.finished.set_result(stop.value)
            return
        finally:
            kernel.current = prev
        if not hasattr(trig, "_register"):
            self.alive = False
            raise SimError(f"process {self.name} yielded non-trigger {trig!r}")
        self._token += 1
        self.waiting_on = trig
        trig._register(self, self._token)

    def _valid(self, token):
        return self.alive and token == self._token

    def _fire(self, token, value):
        """Resume now, inside the event that is currently executing."""
        if token == self._token and self.alive:
            self._token += 1
            self._step(value)

    def _wake(self, token, value):
        """Resume in a new event at the current time."""
        if token == self._token and self.alive:
            self._token += 1
            self.kernel.schedule(partial(self._step, value), 0, self.name)

    def kill(self):
        self.alive = False
        self._token += 1
        self.gen.close()


# -- triggers ---------------------------------------------------------------


class Timer:
    def __init__(self, delay):
        if delay < 0:
            raise SimError(f"negative timer delay {delay}")
        self.delay = delay

    def __repr__(self):
        return f"Timer({self.delay})"

    def _register(self, waker, token):
        kernel = waker.kernel
        kernel.schedule(partial(waker._fire, token, self), self.delay, waker.name)


class Edge:
    """Wait for a value change on ``signal`` of the given kind.

    ``rising`` is a zero to non-zero transition, ``falling`` the reverse and
    ``any`` every change.
    """

    KINDS = ("rising", "falling", "any")

    def __init__(self, signal, kind="any"):
        if kind not in self.KINDS:
            raise SimError(f"unknown edge kind {kind!r}")
        self.signal = signal
        self.kind = kind

    def __repr__(self):
        return f"Edge({self.signal.name}, {self.kind})"

    def _register(self, waker, token):
        self.signal._waiters.append((self.kind, waker, token))


def RisingEdge(signal):
    return Edge(signal, "rising")


def FallingEdge(signal):
    return Edge(signal, "falling")


class Future:
    """One-shot result; waiting on a completed future resumes immediately."""

    def __init__(self, kernel):
        self.kernel = kernel
        self.done = False
        self.value = None
        self._waiters = []

    def __repr__(self):
        return f"Future(done={self.done})"

    def set_result(self, value=None):
        if self.done:
            raise SimError("future already completed")
        self.done = True
        self.value = value
        waiters, self._waiters = self._waiters, []
        for waker, token in waiters:
            waker._wake(token, value)

    def _register(self, waker, token):
        if self.done:
            waker._wake(token, self.value)
        else:
            self._waiters.append((waker, token))


def Join(process):
    return process.finished


class SimEvent:
    """Edge-style notification: ``set`` wakes whoever is waiting right now."""

    def __init__(self, kernel, name="event"):
        self.kernel = kernel
        self.name = name
        self._waiters = []

    def __repr__(self):
        return f"SimEvent({self.name})"

    def set(self, value=None):
        waiters, self._waiters = self._waiters, []
        for waker, token in waiters:
            waker._wake(token, value)

    def _register(self, waker, token):
        self._waiters.append((waker, token))


class _Branch:
    """Adapts a waker so a sub-trigger of ``First`` reports which one fired."""

    __slots__ = ("waker", "trigger")

    def __init__(self, waker, trigger):
        self.waker = waker
        self.trigger = trigger

    @property
    def kernel(self):
        return self.waker.kernel

    @property
    def name(self):
        return self.waker.name

    def _valid(self, token):
        return self.waker._valid(token)

    def _fire(self, token, value):
        self.waker._fire(token, (self.trigger, value))

    def _wake(self, token, value):
        self.waker._wake(token, (self.trigger, value))


class First:
    """Resume on whichever trigger fires first; yields ``(trigger, value)``."""

    def __init__(self, *triggers):
        self.triggers = triggers

    def __repr__(self):
        return f"First({', '.join(map(repr, self.triggers))})"

    def _register(self, waker, token):
        for trig in self.triggers:
            trig._register(_Branch(waker, trig), token)


def describe(trigger):
    return repr(trigger) if trigger is not None else "not started"


# -- synchronisation helpers ------------------------------------------------


class Queue:
    """Unbounded FIFO between processes."""

    def __init__(self, kernel):
        self.kernel = kernel
        self.items = deque()
        self._getters = deque()

    def __len__(self):
        return len(self.items)

    def put(self, item):
        if self._getters:
            self._getters.popleft().set_result(item)
        else:
            self.items.append(item)

    def get(self):
        if self.items:
            return self.items.popleft()
        fut = Future(self.kernel)
        self._getters.append(fut)
        return (yield fut)


class Lock:
    """FIFO mutex; ``yield from lock.acquire()`` then ``lock.release()``."""

    def __init__(self, kernel):
        self.kernel = kernel
        self.locked = False
        self._waiting = deque()

    def acquire(self):
        if not self.locked:
            self.locked = True
            return
        fut = Future(self.kernel)
        self._waiting.append(fut)
        yield fut

    def release(self):
        if self._waiting:
            self._waiting.popleft().set_result()
        else:
            self.locked = False


# -- wires ------------------------------------------------------------------


class Signal:
    """Two-state wire of 1..64 bits."""

    __slots__ = ("kernel", "name", "width", "value", "last_change", "changes",
                 "_waiters", "_watchers", "_label", "_limit")

    def __init__(self, kernel, name, width=1, value=0):
        if not 1 <= width <= 64:
            raise SimError(f"signal {name}: width {width} outside 1..64")
        self.kernel = kernel
        self.name = name
        self.width = width
        self._limit = 1 << width
        if not 0 <= value < self._limit:
            raise WidthError(f"{name}: initial value {value:#x} does not fit {width} bits")
        self.value = value
        self.last_change = 0
        self.changes = 0
        self._waiters = []
        self._watchers = []
        self._label = "sig:" + name

    def __repr__(self):
        return f"Signal({self.name}[{self.width}]={self.value:#x})"

    def drive(self, value, delay=0):
        if not 0 <= value < self._limit:
            raise WidthError(f"{self.name}: value {value:#x} does not fit {self.width} bits")
        self.kernel.schedule(partial(self._apply, value), delay, self._label)

    def watch(self, callback):
        """Call ``callback(signal, old, new)`` on every value change."""
        self._watchers.append(callback)

    def _apply(self, value):
        old = self.value
        if value == old:
            return
        self.value = value
        self.last_change = self.kernel.now
        self.changes += 1
        for cb in self._watchers:
            cb(self, old, value)
        waiters = self._waiters
        if not waiters:
            return
        rose = not old and value
        fell = old and not value
        keep = []
        for entry in waiters:
            kind, waker, token = entry
            if kind == "any" or (kind == "rising" and rose) or (kind == "falling" and fell):
                waker._wake(token, value)
            elif waker._valid(token):
                keep.append(entry)
        self._waiters = keep


class Clock:
    """50% duty clock starting low; rising edges at ``period/2 + k*period``."""

    def __init__(self, kernel, signal, period=DEFAULT_CLOCK_PERIOD):
        if period < 2 or period % 2:
            raise SimError(f"clock period must be even and >= 2, got {period}")
        self.kernel = kernel
        self.signal = signal
        self.period = period
        self.half = period // 2
        self._label = "clk:" + signal.name

    def start(self):
        self.signal._apply(0)
        self.kernel.schedule(self._rise, self.half, self._label)
        return self

    def _rise(self):
        self.signal._apply(1)
        self.kernel.schedule(self._fall, self.half, self._label)

    def _fall(self):
        self.signal._apply(0)
        self.kernel.schedule(self._rise, self.half, self._label)


def reset_sequence(clk, rst_n, cycles=2):
    """Hold active-low reset for ``cycles`` rising edges, then release it."""
    rst_n.drive(0)
    for _ in range(cycles):
        yield RisingEdge(clk)
    rst_n.drive(1)


def wait_cycles(clk, n):
    for _ in range(n):
        yield RisingEdge(clk)
