"""Script entry point: render one figure from CSV inputs, or all analogues
from an artifact directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ddstab_figures.render import KINDS, FigureSpec, SchemaMismatch, render, render_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddstab-figures")
    subs = parser.add_subparsers(dest="command", required=True)

    one = subs.add_parser("render", help="render one figure from CSV inputs")
    one.add_argument("inputs", nargs="+", help="input CSV path(s)")
    one.add_argument("--kind", choices=KINDS, required=True)
    one.add_argument("--out", required=True, help="output image path")
    one.add_argument("--approach", default=None,
                     help="approach filter for heatmap inputs")

    every = subs.add_parser("all", help="render the eight analogues from an artifact dir")
    every.add_argument("--artifact-dir", required=True)
    every.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            options = {}
            if args.approach is not None:
                options["approach"] = args.approach
            spec = FigureSpec(inputs=tuple(Path(p) for p in args.inputs),
                              kind=args.kind, output=Path(args.out), options=options)
            print(f"wrote {render(spec)}")
        else:
            for path in render_all(args.artifact_dir, args.out_dir):
                print(f"wrote {path}")
        return 0
    except (SchemaMismatch, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
