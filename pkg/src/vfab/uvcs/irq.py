"""Generic interrupt checker.

An expectation is armed when a triggering event (e.g. a frame completing)
happens while its predicate over the register mirrors holds.  Every rising
edge on the interrupt line must fall inside the window of an armed, still
unmatched expectation; every armed expectation must be matched.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..sim import RisingEdge
from ..tb import AnalysisExport, Component


@dataclass(frozen=True)
class InterruptExpectation:
    line_id: int
    predicate: object
    window: tuple = (0, 160)
    name: str = "irq"

    def __post_init__(self):
        lo, hi = self.window
        if lo < 0 or hi < lo:
            raise ValueError(f"bad interrupt window {self.window}")


@dataclass(frozen=True)
class Armed:
    line_id: int
    trigger_time: int
    window: tuple
    name: str = "irq"

    @property
    def opens(self):
        return self.trigger_time + self.window[0]

    @property
    def closes(self):
        return self.trigger_time + self.window[1]


@dataclass(frozen=True)
class IrqVerdict:
    ok: bool
    code: str
    line_id: int
    time: int
    message: str


def check_interrupt(assertions, armed, now=None):
    """Match interrupt assertions against armed expectations.

    ``assertions`` is a list of ``(line_id, time)``.  With ``now`` given,
    expectations whose window is still open at ``now`` are left pending
    rather than reported missing.
    """
    open_ = sorted(armed, key=lambda a: (a.trigger_time, a.line_id))
    used = [False] * len(open_)
    verdicts = []
    for line_id, t in sorted(assertions, key=lambda a: (a[1], a[0])):
        for i, exp in enumerate(open_):
            if not used[i] and exp.line_id == line_id and exp.opens <= t <= exp.closes:
                used[i] = True
                verdicts.append(IrqVerdict(True, "irq_ok", line_id, t,
                                           f"{exp.name} asserted {t - exp.trigger_time} ticks after trigger"))
                break
        else:
            verdicts.append(IrqVerdict(False, "irq_spurious", line_id, t,
                                       f"interrupt line {line_id} asserted at t={t} with no armed expectation"))
    for i, exp in enumerate(open_):
        if used[i] or (now is not None and exp.closes > now):
            continue
        verdicts.append(IrqVerdict(False, "irq_missing", exp.line_id, exp.closes,
                                   f"{exp.name} armed at t={exp.trigger_time} never asserted "
                                   f"within {exp.window}"))
    return verdicts


class InterruptChecker(Component):
    """Watches one interrupt line; the ``trigger`` export arms expectations.

    Config keys: ``irq`` (the line signal) and ``expectation``
    (an :class:`InterruptExpectation`).
    """

    kind = "checker"

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.trigger = AnalysisExport(self, "trigger", self._on_trigger)
        self.assertions = []
        self.armed = []
        self.verdicts = []

    def build_phase(self):
        self.irq = self.get_config("irq")
        self.expectation = self.get_config("expectation")

    def _on_trigger(self, _item):
        exp = self.expectation
        if exp is None or not exp.predicate():
            return
        self.armed.append(Armed(exp.line_id, self.kernel.now, exp.window, exp.name))

    def run_phase(self):
        if self.irq is None:
            return None
        return self._watch()

    def _watch(self):
        line_id = self.expectation.line_id if self.expectation else 0
        while True:
            yield RisingEdge(self.irq)
            self.assertions.append((line_id, self.kernel.now))

    def check_phase(self):
        self.verdicts = check_interrupt(self.assertions, self.armed)
        for v in self.verdicts:
            if not v.ok:
                self.error(v.code, v.message)
