"""Cycle-level models of the demo designs and their fault modes.

Both IPs share one skeleton: an SRB register slave, a one-cycle video
pipeline from ``vin`` to ``vout`` and a level interrupt equal to
``INT_STATUS & INT_ENABLE``.  Pixel parameters and geometry are latched at
``frame_start``; a frame is finished when HEIGHT input lines have ended,
and ``INT_STATUS`` is set two cycles after the last output line.

The register decode here is written out by hand rather than derived from the
register model, so the built-in register sequences really test something.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..checking import ganc_pixel, thr_pixel
from ..sim import Clock, RisingEdge, reset_sequence
from ..uvcs.srb import SrbBus, SrbInterconnect, SrbSlave
from ..uvcs.vsp import VspBus

FAULTS = ("none", "gain_stuck0", "bad_reset_width", "corrupt_pixel", "drop_pixel", "drop_frame",
          "spurious_irq", "drop_irq", "swap_chain")
CORRUPT_XOR = 0x01
IRQ_DELAY = 3  # edges from the last input line ending to INT_STATUS set
RESET_CYCLES = 3

SUBSYS_GANC = 0x0000
SUBSYS_THR = 0x1000
SUBSYS_SIZE = 0x2000
SOC_SUBSYS = 0x4000_0000
SOC_VRI = 0x5000_0000
VRI_SIZE = 0x100


class FaultError(ValueError):
    pass


@dataclass(frozen=True)
class FaultMode:
    name: str = "none"
    arg: int | None = None

    def __str__(self):
        return self.name if self.arg is None else f"{self.name}:{self.arg}"


def parse_fault(text):
    text = (text or "none").strip()
    name, _, arg = text.partition(":")
    if name not in FAULTS:
        raise FaultError(f"unknown fault mode {name!r} (known: {', '.join(FAULTS)})")
    if name == "corrupt_pixel":
        if not arg:
            raise FaultError("corrupt_pixel needs a pixel index, e.g. corrupt_pixel:37")
        try:
            k = int(arg, 0)
        except ValueError:
            raise FaultError(f"bad pixel index {arg!r}") from None
        if k < 0:
            raise FaultError("pixel index must be >= 0")
        return FaultMode(name, k)
    if arg:
        raise FaultError(f"fault {name} takes no argument")
    return FaultMode(name)


# register offsets shared by both IPs
CTRL, INT_ENABLE, INT_STATUS, STATUS = 0x00, 0x14, 0x18, 0x1C
GAIN, OFFSET, WIDTH, HEIGHT = 0x04, 0x08, 0x0C, 0x10
THRESH = 0x04


class VideoIp:
    """Common register slave, video pipeline and interrupt logic."""

    name = "ip"
    # offset -> (writable mask, reset)
    regs = {}

    def __init__(self, kernel, clk, rst_n, srb, vin, vout, irq, fault=FaultMode()):
        self.kernel = kernel
        self.clk = clk
        self.rst_n = rst_n
        self.srb = srb
        self.vin = vin
        self.vout = vout
        self.irq = irq
        self.fault = fault
        self.slave = SrbSlave(srb, self.access)
        self.shadow = {}
        self.frames_in = 0
        self.frames_out = 0
        self._reset()

    def _reset(self):
        self.r = {off: reset for off, (_, reset) in self.regs.items()}
        self.table = list(range(256))
        self.height = 0
        self.lines = 0
        self.active = False
        self.prev_lv = 0
        self.pix = 0
        self.countdown = 0
        self.suppress = False
        self.slave.acking = False

    def start(self):
        return self.kernel.spawn(self._run(), f"dut.{self.name}")

    # registers
    def write_reg(self, off, value):
        if off == INT_STATUS:
            self.r[INT_STATUS] &= ~value & 1
        elif off != STATUS:
            self.r[off] = value & self.regs[off][0]

    def access(self, kind, addr, wdata):
        if addr not in self.regs:
            return False, 0
        if kind == "write":
            self.write_reg(addr, wdata)
            return True, 0
        return True, self.r[addr]

    # video
    def pixel_table(self):
        raise NotImplementedError

    def _out(self, sig, value):
        if self.shadow.get(sig.name) != value:
            self.shadow[sig.name] = value
            sig.drive(value)

    def _run(self):
        vin, vout = self.vin, self.vout
        while True:
            yield RisingEdge(self.clk)
            if not self.rst_n.value:
                self._reset()
                for s in vout.signals():
                    self._out(s, 0)
                self._out(self.irq, 0)
                continue
            self.slave.step()
            fs, lv, dv, d = vin.frame_start.value, vin.line_valid.value, vin.data_valid.value, vin.data.value
            if fs:
                self._frame_start()
            out_fs, out_lv, out_dv, out_d = fs, lv, dv, 0
            if dv and self.active:
                idx = self.pix
                self.pix += 1
                out_d = self.table[d]
                if self.fault.name == "corrupt_pixel" and idx == self.fault.arg and not self.frames_in:
                    out_d ^= CORRUPT_XOR
                if self.fault.name == "drop_pixel" and idx == 0:
                    out_dv = 0
            if self.prev_lv and not lv and self.active:
                self.lines += 1
                if self.lines == self.height:
                    self.active = False
                    self.frames_in += 1
                    self.countdown = IRQ_DELAY
            self.prev_lv = lv
            if self.suppress:
                out_fs = out_lv = out_dv = out_d = 0
            self._out(vout.frame_start, out_fs)
            self._out(vout.line_valid, out_lv)
            self._out(vout.data_valid, out_dv)
            self._out(vout.data, out_d if out_dv else 0)
            if self.countdown:
                self.countdown -= 1
                if not self.countdown:
                    self._frame_done()
            self._out(self.irq, self._irq_level())

    def _frame_start(self):
        self.table = self.pixel_table()
        self.height = self.r[HEIGHT]
        self.lines = 0
        self.pix = 0
        self.active = self.height > 0
        self.suppress = self.fault.name == "drop_frame" and self.frames_in == 0
        self.r[STATUS] = 1
        if self.fault.name == "spurious_irq":
            self.r[INT_STATUS] = 1

    def _frame_done(self):
        self.frames_out += 1
        self.r[STATUS] = 0
        if self.fault.name != "drop_irq":
            self.r[INT_STATUS] = 1

    def _irq_level(self):
        if self.fault.name == "spurious_irq":
            return self.r[INT_STATUS] & 1
        return self.r[INT_STATUS] & self.r[INT_ENABLE] & 1


class GancIp(VideoIp):
    """Gain and offset: ``clip(((pix * GAIN) >> 4) + sext(OFFSET), 0, 255)``."""

    name = "ganc"
    regs = {
        CTRL: (0x1, 0),
        GAIN: (0xFF, 0x10),
        OFFSET: (0xFF, 0),
        WIDTH: (0xFFFF, 64),
        HEIGHT: (0xFFFF, 64),
        INT_ENABLE: (0x1, 0),
        INT_STATUS: (0x1, 0),
        STATUS: (0x1, 0),
    }

    def _reset(self):
        super()._reset()
        if self.fault.name == "bad_reset_width":
            self.r[WIDTH] = 0

    def write_reg(self, off, value):
        if off == GAIN and self.fault.name == "gain_stuck0":
            value &= ~1
        super().write_reg(off, value)

    def pixel_table(self):
        g, o, en = self.r[GAIN], self.r[OFFSET], self.r[CTRL] & 1
        return [ganc_pixel(p, g, o, en) for p in range(256)]


class ThrIp(VideoIp):
    """Binary threshold: ``255 if pix >= THRESH else 0``."""

    name = "thr"
    regs = {
        CTRL: (0x1, 0),
        THRESH: (0xFF, 0x80),
        WIDTH: (0xFFFF, 64),
        HEIGHT: (0xFFFF, 64),
        INT_ENABLE: (0x1, 0),
        INT_STATUS: (0x1, 0),
        STATUS: (0x1, 0),
    }

    def pixel_table(self):
        t, en = self.r[THRESH], self.r[CTRL] & 1
        return [thr_pixel(p, t, en) for p in range(256)]


IP_CLASSES = {"ganc": GancIp, "thr": ThrIp}


# -- platforms: signals, DUT instances and wiring per level --------------------------


@dataclass
class IpPorts:
    srb: SrbBus
    vin: VspBus
    vout: VspBus
    irq: object
    dut: VideoIp


class Platform:
    """Clock, reset and DUT instances of one simulation."""

    level = "ip"

    def __init__(self, kernel, fault=FaultMode(), period=10):
        self.kernel = kernel
        self.fault = fault
        self.clk = kernel.signal("clk")
        self.rst_n = kernel.signal("rst_n")
        Clock(kernel, self.clk, period).start()
        kernel.spawn(reset_sequence(self.clk, self.rst_n, RESET_CYCLES), "reset")
        self.ips = {}

    def _ip(self, name, vin, vout, fault):
        k = self.kernel
        srb = SrbBus.create(k, f"{name}.srb", self.clk, self.rst_n)
        irq = k.signal(f"{name}.irq")
        dut = IP_CLASSES[name](k, self.clk, self.rst_n, srb, vin, vout, irq, fault)
        dut.start()
        self.ips[name] = IpPorts(srb, vin, vout, irq, dut)
        return self.ips[name]

    def _video(self, name):
        return VspBus.create(self.kernel, name, self.clk, self.rst_n)


class IpPlatform(Platform):
    level = "ip"

    def __init__(self, kernel, ip="ganc", fault=FaultMode(), period=10):
        super().__init__(kernel, fault, period)
        if fault.name == "swap_chain":
            raise FaultError("swap_chain needs a subsystem (level subsys or soc)")
        self.ip = ip
        self.vin = self._video(f"{ip}.vin")
        self.vout = self._video(f"{ip}.vout")
        self._ip(ip, self.vin, self.vout, fault if ip == "ganc" else FaultMode())


class SubsysPlatform(Platform):
    """GANC then THR on the video path, one SRB port decoded by address."""

    level = "subsys"

    def __init__(self, kernel, fault=FaultMode(), period=10):
        super().__init__(kernel, fault, period)
        self.vin = self._video("sub.vin")
        mid = self._video("sub.mid")
        self.vout = self._video("sub.vout")
        ganc_fault = fault if fault.name != "swap_chain" else FaultMode()
        if fault.name == "swap_chain":
            self._ip("thr", self.vin, mid, FaultMode())
            self._ip("ganc", mid, self.vout, ganc_fault)
        else:
            self._ip("ganc", self.vin, mid, ganc_fault)
            self._ip("thr", mid, self.vout, FaultMode())
        self.srb = SrbBus.create(kernel, "sub.srb", self.clk, self.rst_n)
        self.interconnect = SrbInterconnect(kernel, self.srb, [
            (SUBSYS_GANC, 0x1000, self.ips["ganc"].srb),
            (SUBSYS_THR, 0x1000, self.ips["thr"].srb),
        ], "sub.interconnect")
        self.interconnect.start()

    @property
    def irq_lines(self):
        return [self.ips["ganc"].irq, self.ips["thr"].irq]


class SocPlatform(SubsysPlatform):
    """The subsystem plus a VRI mailbox port behind an SoC-level decoder."""

    level = "soc"

    def __init__(self, kernel, fault=FaultMode(), period=10):
        super().__init__(kernel, fault, period)
        self.sub_srb = self.srb
        self.vri_srb = SrbBus.create(kernel, "vri.srb", self.clk, self.rst_n)
        self.srb = SrbBus.create(kernel, "soc.srb", self.clk, self.rst_n)
        self.soc_interconnect = SrbInterconnect(kernel, self.srb, [
            (SOC_SUBSYS, SUBSYS_SIZE, self.sub_srb),
            (SOC_VRI, VRI_SIZE, self.vri_srb),
        ], "soc.interconnect")
        self.soc_interconnect.start()


PLATFORMS = {"ip": IpPlatform, "subsys": SubsysPlatform, "soc": SocPlatform}
