"""CLI for CDF figure rendering.

Usage: plot --out fig.png [--title TITLE] label=path [label=path ...]
Exit codes: 0 success, 1 usage error, 2 missing or malformed data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import CdfDataError, FigureSpec, plot_cdfs


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_curve(arg: str) -> tuple[str, Path]:
    label, sep, path = arg.partition("=")
    if not sep or not label or not path:
        raise argparse.ArgumentTypeError(f"expected label=path, got {arg!r}")
    return label, Path(path)


def main(argv=None) -> int:
    parser = _Parser(prog="plot", description=__doc__)
    parser.add_argument("--out", required=True, type=Path, help="output image path")
    parser.add_argument("--title", default=None)
    parser.add_argument("curves", nargs="+", type=_parse_curve,
                        metavar="label=path", help="scheme label and its CDF CSV")
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(inputs=tuple(args.curves), output=args.out, title=args.title)
        counts = plot_cdfs(spec)
    except (CdfDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for label, n in counts.items():
        print(f"{label}: {n} points")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
