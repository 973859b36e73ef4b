"""Measured noisy-class conditions for the pointer verification mixture, one row per (n, condition)."""

import argparse
import csv
import sys

from crglab.lab import NoisyClassParams, noisy_class_check, noisy_class_check_lumped
from crglab.sources import enumerate_pv_lumped, enumerate_source


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, default=3)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3, 4, 8, 16])
    ap.add_argument("--C", type=float, default=0.0)
    ap.add_argument("--explicit-max", type=int, default=3, help="largest n checked on the full table")
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout)
    out.writerow(["n", "table", "condition", "measured", "threshold", "margin", "passed"])
    for n in args.n:
        params = NoisyClassParams(n, args.r, min(2 / n, 0.9), args.C)
        if n <= args.explicit_max:
            rep, kind = noisy_class_check(enumerate_source("pv-mix", r=args.r, n=n), params), "explicit"
        else:
            rep, kind = noisy_class_check_lumped(enumerate_pv_lumped(args.r, n, "mix"), params), "lumped"
        for c in rep.conditions:
            out.writerow([n, kind, c.name, c.measured, c.threshold, c.margin, c.passed])


if __name__ == "__main__":
    main()
