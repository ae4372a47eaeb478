"""Command-line entry: render figures from pclda metrics files.

Exit codes: 0 success, 2 usage error, 3 schema/data error.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, render
from .schema import SchemaError

EXIT_USAGE = 2
EXIT_DATA = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pclda-plots",
        description="Figure rendering for pclda metrics exports")
    sub = parser.add_subparsers(dest="cmd", required=True)
    rd = sub.add_parser("render", help="render a figure from metrics files")
    rd.add_argument("--kind", required=True, choices=KINDS)
    rd.add_argument("--in", dest="inputs", required=True,
                    help="comma-separated metrics CSV/JSON paths "
                         "(a checkpoint JSON for --kind topic-grid)")
    rd.add_argument("--out", required=True,
                    help="output image path (.png or .svg)")
    rd.add_argument("--metric", default="data_nll_per_token",
                    help="y-axis column for --kind ksweep")
    rd.add_argument("--xlabel", default="")
    rd.add_argument("--ylabel", default="")
    rd.add_argument("--dpi", type=int, default=100)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    inputs = tuple(p for p in args.inputs.split(",") if p)
    try:
        spec = PlotSpec(inputs=inputs, kind=args.kind, out=args.out,
                        xlabel=args.xlabel, ylabel=args.ylabel,
                        metric=args.metric, dpi=args.dpi)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        count = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {args.out} ({count} {'topics' if args.kind == 'topic-grid' else 'series' if args.kind == 'ksweep' else 'markers'})",
          file=sys.stderr)
    return 0


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    sys.exit(main())
