"""Frame stimulus described by a few integers, so the same frame can be
requested from a Python sequence or from a test program through the mailbox."""

from dataclasses import dataclass

from ..frame import make_frame
from ..seq import Rng
from ..uvcs.vsp import VspTiming, random_timing

PATTERNS = ("ramp", "const", "random")


@dataclass(frozen=True)
class FrameSpec:
    width: int
    height: int
    pattern: str = "ramp"
    seed: int = 0


def frame_from_spec(spec):
    if spec.pattern == "random":
        return make_frame(spec.width, spec.height, "random", Rng(spec.seed, ("frame",)))
    return make_frame(spec.width, spec.height, spec.pattern, value=spec.seed & 0xFF)


def timing_from_seed(seed):
    """Seed 0 gives back-to-back pixels; any other seed random gaps and stalls."""
    if not seed:
        return VspTiming()
    return random_timing(Rng(seed, ("timing",)))
