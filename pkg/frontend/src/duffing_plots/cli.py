"""Figure-rendering command line: ``plots render --figure fig2 --in PREFIX --out F``."""

from __future__ import annotations

import argparse
import sys

from duffing_plots.errors import PlotsError, SchemaError
from duffing_plots.recipes import available_figures, load_recipe
from duffing_plots.render import render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("render", help="render one figure from CSV curves")
    rp.add_argument("--figure", required=True, choices=available_figures())
    rp.add_argument("--in", dest="prefix", required=True,
                    help="input path prefix (the duffing-qdyn --out value)")
    rp.add_argument("--out", required=True, help="output image (.svg or .png)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        recipe = load_recipe(args.figure)
        summary = render(recipe, args.prefix, args.out)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except PlotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.out}: {summary['panels']} panel(s), series {summary['series']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
