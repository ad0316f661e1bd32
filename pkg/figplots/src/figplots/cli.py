"""`render-figures <export-dir> <out-dir>`: render every exported figure CSV."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FigureDataError, FigureSpec, render


def run(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="render-figures",
                                     description=__doc__)
    parser.add_argument("export_dir", type=Path,
                        help="directory holding the fig_*.csv exports")
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args(argv)
    sources = sorted(args.export_dir.glob("fig_*.csv"))
    if not sources:
        print(f"render-figures: no fig_*.csv files in {args.export_dir}",
              file=sys.stderr)
        return 1
    for path in sources:
        spec = FigureSpec(csv_path=path, figure_id=path.stem)
        try:
            out = render(spec, args.out_dir)
        except FigureDataError as exc:
            print(f"render-figures: {exc}", file=sys.stderr)
            return 1
        print(out)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))
