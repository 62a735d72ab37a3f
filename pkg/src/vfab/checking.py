"""Bit-accurate frame checking against reference models.

Reference models are pure functions of ``(frame, attributes)``.  Attributes
come from the register mirrors through a binding (attribute name to
``block.REG.FIELD``) and are snapshot when the input frame starts, so a
register written mid-stream only affects frames that start after it.
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .frame import Frame, FrameError, read_pgm, write_pgm
from .tb import AnalysisExport, Component

FIRST_K = 16


class ReferenceModelError(Exception):
    pass


# -- demo pixel functions -------------------------------------------------------


def sext8(value):
    value &= 0xFF
    return value - 0x100 if value & 0x80 else value


def clip8(value):
    return 0 if value < 0 else 255 if value > 255 else value


def ganc_pixel(pix, gain, offset, enable=1):
    """GAIN is unsigned 4.4 fixed point, OFFSET an 8-bit two's complement."""
    if not enable:
        return pix
    return clip8(((pix * gain) >> 4) + sext8(offset))


def thr_pixel(pix, thresh, enable=1):
    if not enable:
        return pix
    return 255 if pix >= thresh else 0


def ganc_ref(frame, attrs):
    table = [ganc_pixel(p, attrs["gain"], attrs["offset"], attrs.get("enable", 1)) for p in range(256)]
    return frame.map(table.__getitem__)


def thr_ref(frame, attrs):
    table = [thr_pixel(p, attrs["thresh"], attrs.get("enable", 1)) for p in range(256)]
    return frame.map(table.__getitem__)


# -- reference models ------------------------------------------------------------


@dataclass(frozen=True)
class RefModel:
    """``fn(frame, attrs)`` in-process, or ``command`` run as an external
    process with ``input.pgm attrs.txt output.pgm`` appended."""

    model_id: str
    schema: tuple
    fn: object = None
    command: tuple = None

    def validate(self, attrs):
        missing = [n for n, _ in self.schema if n not in attrs]
        if missing:
            raise ReferenceModelError(f"{self.model_id}: missing attribute(s) {', '.join(missing)}")
        for name, typ in self.schema:
            if not isinstance(attrs[name], typ):
                raise ReferenceModelError(
                    f"{self.model_id}: attribute {name}={attrs[name]!r} is not {typ.__name__}")


GANC_SCHEMA = (("gain", int), ("offset", int), ("enable", int))
THR_SCHEMA = (("thresh", int), ("enable", int))

GANC_MODEL = RefModel("ganc", GANC_SCHEMA, fn=ganc_ref)
THR_MODEL = RefModel("thr", THR_SCHEMA, fn=thr_ref)
MODELS = {"ganc": GANC_MODEL, "thr": THR_MODEL}


def external_model(model_id, command=None):
    base = MODELS[model_id]
    cmd = tuple(command) if command else (sys.executable, "-m", "vfab.refproc", model_id)
    return RefModel(model_id, base.schema, command=cmd)


def write_attrs(path, attrs):
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in sorted(attrs.items())))


def read_attrs(path):
    attrs = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, eq, value = line.partition("=")
        if not eq:
            raise ReferenceModelError(f"{path}: bad attribute line {line!r}")
        attrs[name.strip()] = int(value.strip(), 0)
    return attrs


def run_reference(model, frame, attrs):
    model.validate(attrs)
    if model.fn is not None:
        return model.fn(frame, attrs)
    if not model.command:
        raise ReferenceModelError(f"{model.model_id}: no evaluation method")
    with tempfile.TemporaryDirectory(prefix="vfab-ref-") as tmp:
        src, attr_file, dst = (os.path.join(tmp, n) for n in ("input.pgm", "attrs.txt", "output.pgm"))
        write_pgm(src, frame)
        write_attrs(attr_file, attrs)
        proc = subprocess.run([*model.command, src, attr_file, dst], capture_output=True, text=True)
        if proc.returncode != 0:
            raise ReferenceModelError(
                f"{model.model_id}: external model exited {proc.returncode}: {proc.stderr.strip()[-400:]}")
        try:
            out = read_pgm(dst)
        except (OSError, FrameError) as exc:
            raise ReferenceModelError(f"{model.model_id}: bad output: {exc}") from None
    return Frame(out.width, out.height, out.pixels, frame.bpp, frame.frame_id)


# -- comparison --------------------------------------------------------------------


@dataclass(frozen=True)
class MismatchReport:
    total: int
    details: tuple
    expected_id: int = -1
    actual_id: int = -1
    geometry_error: str | None = None

    @property
    def ok(self):
        return self.total == 0 and self.geometry_error is None

    def summary(self):
        if self.geometry_error:
            return self.geometry_error
        if not self.total:
            return "match"
        first = ", ".join(f"({x},{y}) exp {e} got {a}" for x, y, e, a in self.details[:4])
        return f"{self.total} mismatching pixel(s); first: {first}"


def check_frame(actual, expected, k=FIRST_K):
    ids = dict(expected_id=expected.frame_id, actual_id=actual.frame_id)
    if actual.geometry != expected.geometry:
        return MismatchReport(0, (), geometry_error=(
            f"geometry {actual.width}x{actual.height}, expected {expected.width}x{expected.height}"), **ids)
    w = expected.width
    total = 0
    details = []
    for i, (a, e) in enumerate(zip(actual.pixels, expected.pixels)):
        if a != e:
            total += 1
            if len(details) < k:
                details.append((i % w, i // w, e, a))
    return MismatchReport(total, tuple(details), **ids)


# -- attributes and scoreboard --------------------------------------------------------


def snapshot_attributes(binding, model):
    """Read each bound attribute from the register mirrors."""
    attrs = {}
    for name, path in binding.items():
        if path.count(".") == 2:
            attrs[name] = model.field_value(path)
        else:
            attrs[name] = model.lookup(path).mirror
    return attrs


@dataclass
class Verdict:
    frame_id: int
    passed: bool
    report: MismatchReport | None
    attrs: tuple = ()


@dataclass
class Stage:
    model: RefModel
    binding: dict
    regmodel: object = None


class FrameScoreboard(Component):
    """Ordered frame matcher.

    Feed input frame starts to ``in_start``, completed input frames to
    ``in_frame`` and completed output frames to ``out_frame``.  Expected
    output is the input pushed through every configured stage in order.

    Config: ``stages`` (list of :class:`Stage`).
    """

    kind = "scoreboard"

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.in_start = AnalysisExport(self, "in_start", self._on_start)
        self.in_frame = AnalysisExport(self, "in_frame", self._on_input)
        self.out_frame = AnalysisExport(self, "out_frame", self._on_output)
        self.snapshots = deque()
        self.expected = deque()
        self.verdicts = []
        self.mismatches = 0

    def build_phase(self):
        self.stages = list(self.get_config("stages", []))

    def _on_start(self, _fs):
        self.snapshots.append([snapshot_attributes(s.binding, s.regmodel) for s in self.stages])

    def _on_input(self, obs):
        snaps = self.snapshots.popleft() if self.snapshots else None
        if obs.frame is None:
            return
        if snaps is None:
            self.error("sb_internal", f"input frame {obs.frame_id} has no start snapshot")
            return
        frame = obs.frame
        try:
            for stage, attrs in zip(self.stages, snaps):
                frame = run_reference(stage.model, frame, attrs)
        except ReferenceModelError as exc:
            self.error("refmodel", str(exc))
            return
        self.expected.append((obs.frame_id, frame, snaps))

    def _on_output(self, obs):
        if not self.expected:
            self.error("sb_unexpected", f"output frame {obs.frame_id} with no expected frame pending")
            return
        in_id, expected, snaps = self.expected.popleft()
        if obs.frame is None:
            self.verdicts.append(Verdict(in_id, False, None, tuple(map(_freeze, snaps))))
            self.error("sb_geometry", f"output frame {obs.frame_id} (for input {in_id}) has "
                       f"line lengths {list(obs.line_lengths)}")
            return
        report = check_frame(obs.frame.with_id(obs.frame_id), expected.with_id(in_id))
        self.verdicts.append(Verdict(in_id, report.ok, report, tuple(map(_freeze, snaps))))
        self.mismatches += report.total
        self.ctx.bump("mismatches", report.total)
        self.ctx.bump("frames_checked")
        if not report.ok:
            self.error("sb_mismatch", f"frame {in_id}: {report.summary()}")

    def check_phase(self):
        if self.expected:
            ids = [i for i, _, _ in self.expected]
            self.error("sb_leftover", f"{len(ids)} expected frame(s) never produced (input ids {ids})")


def _freeze(attrs):
    return tuple(sorted(attrs.items()))
