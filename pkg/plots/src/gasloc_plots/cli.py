"""Command line: render a figure from gasloc output files.

plot --kind benchmark_box --in bench_out/results.jsonl --out compare.png
plot --kind estimation_panels --in trial.npz --out panels.png --panels 1,8,15
"""

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, render
from .logs import LogFormatError


def _parse_panels(text: str) -> tuple[int, ...]:
    try:
        panels = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"panels must be comma-separated integers, got {text!r}")
    if not panels:
        raise argparse.ArgumentTypeError("panels list is empty")
    return panels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from gasloc logs and trial dumps.")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS,
                        help="figure type")
    parser.add_argument("--in", dest="inputs", required=True, action="append",
                        metavar="PATH",
                        help="input log (.jsonl) or trial dump (.npz); "
                             "repeat to pool benchmark logs")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--panels", type=_parse_panels, default=None,
                        metavar="I,J,K",
                        help="estimation_panels only: 1-based iterations to "
                             "show (default: first, middle, last)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.panels is not None and args.kind != "estimation_panels":
        print("error: --panels only applies to estimation_panels", file=sys.stderr)
        return 2
    spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind,
                      out=args.out, panels=args.panels)
    try:
        out = render(spec)
    except LogFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
