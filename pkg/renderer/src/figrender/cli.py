"""`render <plotspec.json> [...]` — batch-render figures from CSV artifacts."""

from __future__ import annotations

import argparse
import sys

from .render import extract, render
from .spec import SpecError, load_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render figures from delimited experiment artifacts")
    parser.add_argument("plotspec", nargs="+",
                        help="plot specification JSON file(s)")
    parser.add_argument("--extract", metavar="OUT_CSV", default=None,
                        help="instead of rendering, write the plotted CSV "
                             "cells verbatim (single plotspec only)")
    args = parser.parse_args(argv)
    if args.extract and len(args.plotspec) != 1:
        parser.error("--extract takes exactly one plotspec")
    try:
        if args.extract:
            extract(load_spec(args.plotspec[0]), args.extract)
            print(args.extract)
        else:
            for path in args.plotspec:
                out = render(load_spec(path))
                print(out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
