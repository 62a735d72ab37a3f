"""VSP: the video stream port.

Producer-driven, no backpressure.  Per frame: a one-cycle ``frame_start``
pulse, then ``height`` lines.  During a line ``line_valid`` stays high and
each pixel is transferred on a cycle with ``data_valid`` high; the producer
may stall (``data_valid`` low) between pixels.  Lines are separated by at
least one cycle with ``line_valid`` low, plus ``inter_line_gap`` extra idle
cycles; ``inter_frame_gap`` idle cycles follow the last line.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..frame import Frame
from ..seq import Sequence
from ..sim import RisingEdge
from ..tb import AnalysisPort, Agent, BuildError, Driver, Monitor, Sequencer


@dataclass
class VspBus:
    clk: object
    rst_n: object
    frame_start: object
    line_valid: object
    data_valid: object
    data: object

    @classmethod
    def create(cls, kernel, prefix, clk, rst_n, bpp=8):
        s = kernel.signal
        return cls(clk, rst_n, s(f"{prefix}.frame_start"), s(f"{prefix}.line_valid"),
                   s(f"{prefix}.data_valid"), s(f"{prefix}.data", bpp))

    def signals(self):
        return [self.frame_start, self.line_valid, self.data_valid, self.data]


@dataclass(frozen=True)
class VspTiming:
    inter_frame_gap: int = 0
    inter_line_gap: int = 0
    pixel_stall_probability: float = 0.0
    max_stall: int = 4

    def __post_init__(self):
        if self.inter_frame_gap < 0 or self.inter_line_gap < 0:
            raise ValueError("VSP gaps must be >= 0")
        if not 0.0 <= self.pixel_stall_probability <= 1.0:
            raise ValueError("stall probability must be within [0, 1]")
        if self.max_stall < 0:
            raise ValueError("max_stall must be >= 0")


def random_timing(rng, max_gap=6):
    return VspTiming(
        inter_frame_gap=rng.randint(0, max_gap),
        inter_line_gap=rng.randint(0, max_gap // 2),
        pixel_stall_probability=rng.choice((0.0, 0.05, 0.2)),
        max_stall=rng.randint(1, 4),
    )


@dataclass
class VspItem:
    frame: Frame
    timing: VspTiming = VspTiming()
    stall_rng: object = None


@dataclass
class FrameStart:
    frame_id: int
    time: int


@dataclass
class ObservedFrame:
    """A frame as reconstructed by a monitor.  ``frame`` is None when the
    collected lines do not form the expected geometry."""

    frame_id: int
    frame: Frame | None
    geometry: tuple
    line_lengths: tuple
    start_time: int
    end_time: int

    @property
    def ok(self):
        return self.frame is not None


def vsp_send_frame(bus, frame, timing=VspTiming(), rng=None):
    clk = bus.clk
    p = timing.pixel_stall_probability
    yield RisingEdge(clk)
    bus.frame_start.drive(1)
    yield RisingEdge(clk)
    bus.frame_start.drive(0)
    for y, row in enumerate(frame.rows()):
        bus.line_valid.drive(1)
        for pix in row:
            stalls = 0
            while p > 0.0 and stalls < timing.max_stall and rng.random() < p:
                if stalls == 0:
                    bus.data_valid.drive(0)
                yield RisingEdge(clk)
                stalls += 1
            bus.data.drive(pix)
            bus.data_valid.drive(1)
            yield RisingEdge(clk)
        bus.data_valid.drive(0)
        bus.line_valid.drive(0)
        gap = timing.inter_line_gap if y < frame.height - 1 else timing.inter_frame_gap
        for _ in range(1 + gap):
            yield RisingEdge(clk)


class FrameAssembler:
    """Per-cycle VSP decoder.

    ``geometry()`` is consulted at every frame_start for the expected
    ``(width, height)``.  Callbacks: ``on_start(FrameStart)``,
    ``on_frame(ObservedFrame)`` and ``on_error(code, message)``.
    """

    def __init__(self, geometry, on_start, on_frame, on_error, bpp=8):
        self.geometry = geometry
        self.on_start = on_start
        self.on_frame = on_frame
        self.on_error = on_error
        self.bpp = bpp
        self.next_id = 0
        self.in_frame = False
        self.expected = None
        self.lines = []
        self.line = None
        self.start_time = 0
        self._long_reported = False

    def _pixels_so_far(self):
        return sum(len(l) for l in self.lines) + len(self.line or ())

    def sample(self, now, frame_start, line_valid, data_valid, data):
        if frame_start:
            if self.in_frame:
                w, h = self.expected
                self.on_error("vsp_framing",
                              f"frame_start at pixel {self._pixels_so_far()} of {w * h} "
                              f"(frame {self.next_id})")
                self.next_id += 1
            self.in_frame = True
            self.expected = tuple(self.geometry())
            self.lines = []
            self.line = None
            self.start_time = now
            self._long_reported = False
            self.on_start(FrameStart(self.next_id, now))
            return
        if not self.in_frame:
            if line_valid or data_valid:
                self.on_error("vsp_framing", "video activity outside a frame")
            return
        w, h = self.expected
        if line_valid:
            if self.line is None:
                self.line = []
            if data_valid:
                self.line.append(data)
                if len(self.line) > w and not self._long_reported:
                    self._long_reported = True
                    self.on_error("vsp_geometry",
                                  f"frame {self.next_id} line {len(self.lines)} longer than WIDTH={w}")
            return
        if data_valid:
            self.on_error("vsp_framing", "data_valid without line_valid")
        if self.line is None:
            return
        y = len(self.lines)
        if len(self.line) < w:
            self.on_error("vsp_geometry",
                          f"frame {self.next_id} line {y} has {len(self.line)} pixels, WIDTH={w}")
        self.lines.append(self.line)
        self.line = None
        if len(self.lines) == h:
            self._finish(now)

    def _finish(self, now):
        w, h = self.expected
        lengths = tuple(len(l) for l in self.lines)
        frame = None
        if all(n == w for n in lengths):
            frame = Frame(w, h, [p for l in self.lines for p in l], self.bpp, self.next_id)
        self.on_frame(ObservedFrame(self.next_id, frame, (w, h), lengths, self.start_time, now))
        self.next_id += 1
        self.in_frame = False
        self.lines = []


class VspDriver(Driver):
    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.sent_ap = AnalysisPort(self, "sent_ap")
        self.sent = 0

    def _serve(self):
        if self.ctx.rng is not None:
            self.rng = self.ctx.rng.substream(self.path, "stall")
        else:
            self.rng = None
        bus = self.vif
        while not bus.rst_n.value:
            yield RisingEdge(bus.rst_n)
        yield from super()._serve()

    def drive_item(self, item):
        rng = item.stall_rng if item.stall_rng is not None else self.rng
        if rng is None and item.timing.pixel_stall_probability > 0:
            raise BuildError(f"{self.path}: stalls requested but no random stream available")
        frame = item.frame.with_id(self.sent)
        self.sent += 1
        self.sent_ap.write(frame)
        yield from vsp_send_frame(self.vif, frame, item.timing, rng)
        return frame.frame_id


class VspMonitor(Monitor):
    """Collects frames on the input and/or output stream of one video agent."""

    def __init__(self, name, parent=None, **kw):
        super().__init__(name, parent, **kw)
        self.in_ap = AnalysisPort(self, "in_ap")
        self.in_start_ap = AnalysisPort(self, "in_start_ap")
        self.out_ap = AnalysisPort(self, "out_ap")
        self.out_start_ap = AnalysisPort(self, "out_start_ap")
        self.out_vif = None
        self.geometry = None
        self.out_geometry = None
        self.collected = {"in": [], "out": []}

    def run_phase(self):
        if self.vif is not None:
            self.spawn(self._watch("in", self.vif, self.geometry, self.in_start_ap, self.in_ap), "in")
        if self.out_vif is not None:
            self.spawn(self._watch("out", self.out_vif, self.out_geometry or self.geometry,
                                   self.out_start_ap, self.out_ap), "out")
        return None

    def _watch(self, role, bus, geometry, start_ap, frame_ap):
        if geometry is None:
            raise BuildError(f"{self.path}: no geometry source for the {role} stream")

        def on_frame(obs):
            self.collected[role].append(obs)
            frame_ap.write(obs)

        def on_error(code, msg):
            self.error(code, f"{role}: {msg}")

        asm = FrameAssembler(geometry, start_ap.write, on_frame, on_error, bus.data.width)
        clk = bus.clk
        kernel = clk.kernel
        fs, lv, dv, data, rst = bus.frame_start, bus.line_valid, bus.data_valid, bus.data, bus.rst_n
        while True:
            yield RisingEdge(clk)
            if rst.value:
                asm.sample(kernel.now, fs.value, lv.value, dv.value, data.value)


class VspAgent(Agent):
    """Video agent for one stream index.

    ``vif`` is the input stream (driven when active), ``out_vif`` the output
    stream (monitored only).  An agent without an input stream is always
    passive.
    """

    driver_cls = VspDriver
    monitor_cls = VspMonitor

    def build_phase(self):
        self.vif = self.get_config("vif")
        self.out_vif = self.get_config("out_vif")
        self.is_active = bool(self.get_config("is_active", True)) and self.vif is not None
        if self.get_config("is_active", True) and self.vif is None and self.out_vif is None:
            raise BuildError(f"{self.path}: active agent has no interface binding ('vif')")
        self.monitor = self.monitor_cls.create("monitor", self)
        self.monitor.vif = self.vif
        self.monitor.out_vif = self.out_vif
        self.monitor.geometry = self.get_config("geometry")
        self.monitor.out_geometry = self.get_config("out_geometry")
        if self.is_active:
            self.sequencer = Sequencer.create("sequencer", self)
            self.driver = self.driver_cls.create("driver", self)
            self.driver.vif = self.vif
        else:
            self.sequencer = None
            self.driver = None


class SendFrameSeq(Sequence):
    def __init__(self, frame, timing=None, name="send_frame", stall_rng=None):
        super().__init__(name)
        self.frame = frame
        self.timing = timing
        self.stall_rng = stall_rng
        self.frame_id = None

    def body(self):
        timing = self.timing if self.timing is not None else VspTiming()
        self.frame_id = yield from self.do(VspItem(self.frame, timing, self.stall_rng))
        return self.frame_id
