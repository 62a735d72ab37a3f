"""Direct DUT benches without a testbench tree.

Used for model-equivalence checks: program registers over SRB, push frames
through one cycle-level IP and collect what comes out.
"""

from __future__ import annotations

from ..frame import Frame
from ..sim import Kernel, RisingEdge
from ..uvcs.srb import BusTxn, srb_transfer, wait_reset_release
from ..uvcs.vsp import FrameAssembler, vsp_send_frame
from .duts import (
    CTRL, GAIN, HEIGHT, OFFSET, SUBSYS_GANC, SUBSYS_THR, WIDTH, FaultMode, IpPlatform, SubsysPlatform,
)

GRID_GAINS = (0x00, 0x08, 0x10, 0x18, 0x20, 0xFF)
GRID_OFFSETS = (-128, -5, 0, 5, 127)


def run_ip_frames(ip, jobs, fault=FaultMode(), limit=10_000_000):
    """Run ``jobs`` (a list of ``(register writes, frame)``) through one IP.

    Register writes are ``{offset: value}`` applied before the frame; WIDTH
    and HEIGHT are written from the frame geometry.  Returns the output
    frames in order (None for a frame whose lines were malformed).
    """
    kernel = Kernel()
    plat = IpPlatform(kernel, ip, fault)
    return _run(kernel, plat, plat.ips[ip].srb, (0,), jobs, limit)


def run_subsys_frames(jobs, fault=FaultMode(), limit=10_000_000):
    """Like :func:`run_ip_frames` for the GANC to THR subsystem.

    Register offsets are subsystem addresses; WIDTH and HEIGHT go to both IPs.
    """
    kernel = Kernel()
    plat = SubsysPlatform(kernel, fault)
    return _run(kernel, plat, plat.srb, (SUBSYS_GANC, SUBSYS_THR), jobs, limit)


def _run(kernel, plat, srb, geometry_bases, jobs, limit):
    outputs = []
    geom = [(1, 1)]

    asm = FrameAssembler(lambda: geom[0], lambda fs: None,
                         lambda obs: outputs.append(obs.frame), lambda code, msg: None)

    def collect():
        bus = plat.vout
        while True:
            yield RisingEdge(plat.clk)
            if plat.rst_n.value:
                asm.sample(kernel.now, bus.frame_start.value, bus.line_valid.value,
                           bus.data_valid.value, bus.data.value)

    def main():
        yield from wait_reset_release(srb)
        for writes, frame in jobs:
            regs = dict(writes)
            for base in geometry_bases:
                regs[base + WIDTH], regs[base + HEIGHT] = frame.width, frame.height
            for off, value in regs.items():
                txn = yield from srb_transfer(srb, BusTxn("write", off, value & 0xFFFF_FFFF))
                if txn.resp != "ok":
                    raise RuntimeError(f"register write {off:#x} failed")
            geom[0] = frame.geometry
            yield from vsp_send_frame(plat.vin, frame)
            for _ in range(8):
                yield RisingEdge(plat.clk)
        kernel.stop()

    kernel.spawn(collect(), "bench.collect")
    kernel.spawn(main(), "bench.main")
    kernel.run_until(limit)
    return outputs


def ganc_grid(gains=GRID_GAINS, offsets=GRID_OFFSETS):
    """Every pixel value 0..255 through the GANC model for each (gain, offset).

    Returns ``{(gain, offset): output pixels}`` with ``offset`` as given
    (signed); the register receives its 8-bit two's complement form.
    """
    ramp = Frame(256, 1, range(256))
    combos = [(g, o) for g in gains for o in offsets]
    jobs = [({CTRL: 1, GAIN: g, OFFSET: o & 0xFF}, ramp) for g, o in combos]
    frames = run_ip_frames("ganc", jobs)
    return {c: (f.pixels if f is not None else None) for c, f in zip(combos, frames)}

