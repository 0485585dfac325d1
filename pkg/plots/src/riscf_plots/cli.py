"""CLI: riscf-plots render --csv <file> --figure <kind> --out <png/svg>."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURES, PlotSpec, SchemaError, render


def build_parser():
    parser = argparse.ArgumentParser(prog="riscf-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    ren = sub.add_parser("render", help="render one experiment CSV")
    ren.add_argument("--csv", required=True)
    ren.add_argument("--figure", required=True, choices=FIGURES)
    ren.add_argument("--out", required=True)
    ren.add_argument("--metric", choices=("sum_rate", "min_rate"),
                     default="sum_rate")
    ren.add_argument("--log-y", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        out = render(PlotSpec(csv=args.csv, figure=args.figure, out=args.out,
                              y_metric=args.metric, log_y=args.log_y))
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
