"""Video frames and the binary PGM (P5, 8-bit) file format."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    pixels: tuple
    bpp: int = 8
    frame_id: int = -1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise FrameError(f"frame geometry {self.width}x{self.height} must be at least 1x1")
        pixels = tuple(self.pixels)
        object.__setattr__(self, "pixels", pixels)
        if len(pixels) != self.width * self.height:
            raise FrameError(f"{self.width}x{self.height} frame has {len(pixels)} pixels")
        top = 1 << self.bpp
        for i, p in enumerate(pixels):
            if not 0 <= p < top:
                raise FrameError(f"pixel {i} value {p} out of range for {self.bpp} bpp")

    def __eq__(self, other):
        # frame_id is bookkeeping, not content
        if not isinstance(other, Frame):
            return NotImplemented
        return (self.width, self.height, self.bpp, self.pixels) == (
            other.width, other.height, other.bpp, other.pixels)

    def __hash__(self):
        return hash((self.width, self.height, self.bpp, self.pixels))

    @property
    def geometry(self):
        return self.width, self.height

    def at(self, x, y):
        return self.pixels[y * self.width + x]

    def rows(self):
        w = self.width
        return [self.pixels[y * w:(y + 1) * w] for y in range(self.height)]

    def digest(self):
        return hashlib.sha256(bytes(self.pixels) if self.bpp == 8 else repr(self.pixels).encode()).hexdigest()[:16]

    def with_id(self, frame_id):
        return Frame(self.width, self.height, self.pixels, self.bpp, frame_id)

    def map(self, fn):
        return Frame(self.width, self.height, tuple(fn(p) for p in self.pixels), self.bpp, self.frame_id)


def make_frame(width, height, pattern="ramp", rng=None, value=0):
    """Test pattern frames: ``ramp`` is (x + y) mod 256, ``const`` a flat
    ``value`` and ``random`` uniform 8-bit noise from ``rng``."""
    if pattern == "ramp":
        pixels = [(x + y) & 0xFF for y in range(height) for x in range(width)]
    elif pattern == "const":
        pixels = [value & 0xFF] * (width * height)
    elif pattern == "random":
        pixels = [rng.getrandbits(8) for _ in range(width * height)]
    else:
        raise FrameError(f"unknown pattern {pattern!r}")
    return Frame(width, height, pixels)


def write_pgm(path, frame):
    if frame.bpp != 8:
        raise FrameError("PGM output supports 8-bit frames only")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.width} {frame.height}\n255\n".encode())
        fh.write(bytes(frame.pixels))


_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    m = _HEADER.match(data)
    if m is None:
        raise FrameError(f"{path}: not a binary PGM file")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FrameError(f"{path}: maxval {maxval} unsupported (need 255)")
    body = data[m.end():]
    if len(body) != width * height:
        raise FrameError(f"{path}: expected {width * height} pixel bytes, found {len(body)}")
    return Frame(width, height, tuple(body))
