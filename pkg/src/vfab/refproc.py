"""External reference-model entry point.

    python3 -m vfab.refproc MODEL input.pgm attrs.txt output.pgm
"""

import argparse
import sys

from .checking import MODELS, ReferenceModelError, read_attrs
from .frame import FrameError, read_pgm, write_pgm


def main(argv=None):
    ap = argparse.ArgumentParser(prog="vfab-refproc")
    ap.add_argument("model", choices=sorted(MODELS))
    ap.add_argument("input")
    ap.add_argument("attrs")
    ap.add_argument("output")
    args = ap.parse_args(argv)
    model = MODELS[args.model]
    try:
        frame = read_pgm(args.input)
        attrs = read_attrs(args.attrs)
        model.validate(attrs)
        write_pgm(args.output, model.fn(frame, attrs))
    except (OSError, FrameError, ReferenceModelError, ValueError) as exc:
        print(f"refproc: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
