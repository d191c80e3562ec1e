"""plots <kind> --in file.csv --out fig.png

Batch figure generation from the simulator's documented CSV schemas; a
schema mismatch exits nonzero with the offending column names.
"""

from __future__ import annotations

import argparse
import sys

from .figures import RENDERERS
from .schemas import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots",
                                     description="figure generation from "
                                                 "simulation CSV output")
    parser.add_argument("kind", choices=sorted(RENDERERS))
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    parser.add_argument("--title", default=None)
    parser.add_argument("--eps", type=float, default=0.25,
                        help="ball scaling for the shape overlay")
    parser.add_argument("--directions", default=None,
                        help="shape: directional radius table")
    parser.add_argument("--inclusions", default=None,
                        help="shape: inclusion fraction table")
    parser.add_argument("--bits", default=None, help="macro: edge bit table")
    parser.add_argument("--trial", type=int, default=0,
                        help="macro: which build to draw")
    args = parser.parse_args(argv)
    try:
        if args.kind == "shape":
            RENDERERS["shape"](args.in_path, args.out_path,
                               directions_path=args.directions,
                               inclusions_path=args.inclusions,
                               eps=args.eps, title=args.title)
        elif args.kind == "macro":
            RENDERERS["macro"](args.in_path, args.out_path,
                               bits_path=args.bits, trial=args.trial,
                               title=args.title)
        else:
            RENDERERS[args.kind](args.in_path, args.out_path, title=args.title)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
