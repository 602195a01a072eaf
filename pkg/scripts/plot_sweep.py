#!/usr/bin/env python3
"""Redraw the efficiency-vs-iterations figure from an exported sweep CSV."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fairbeam.evaluation import load_report, plot_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="sweep CSV produced by 'fairbeam eval --sweep'")
    parser.add_argument("-o", "--out", default=None,
                        help="output SVG path (default: alongside the CSV)")
    args = parser.parse_args()
    out = args.out or str(Path(args.csv).with_suffix(".svg"))
    plot_sweep(load_report(args.csv), out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
