#!/usr/bin/env python3
"""Tabulate critical run counts c*(h, T) over a grid of powers and lengths.

Reproduces the threshold-curve view of the detector: for each sequence length
T the largest run count still compatible with honest mining at the chosen
significance level, as a function of the miner's power share.

    python scripts/critical_value_table.py --T 100 1000 5000 --alpha 0.05
"""

import argparse
import csv
import sys

import numpy as np

from minewatch.runstat import critical_count, pmf_chain


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, nargs="+", default=[100, 1000, 5000])
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--h-min", type=float, default=0.02)
    ap.add_argument("--h-max", type=float, default=0.9)
    ap.add_argument("--h-step", type=float, default=0.02)
    ap.add_argument("--out", default="-", help="output csv ('-' = stdout)")
    args = ap.parse_args()

    grid = np.arange(args.h_min, args.h_max + 1e-9, args.h_step)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("T", "h", "c_star", "null_mean", "null_mode"))
    for T in args.T:
        for h in grid:
            h = round(float(h), 6)
            dist = pmf_chain(h, T)
            writer.writerow((T, h, critical_count(h, T, args.alpha),
                             round(dist.mean(), 3), dist.argmax()))
    if fh is not sys.stdout:
        fh.close()
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
