"""Exact best success probability on the pointer verification mixture, over rounds and bits."""

import argparse
import csv
import sys
import time

from crglab.errors import CapExceeded
from crglab.lab import exhaustive_protocol_search
from crglab.sources import enumerate_source


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, default=1, help="pointer verification depth (odd)")
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--rounds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--bits", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--cap", type=int, default=10**6)
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout)
    out.writerow(["r", "n", "rounds", "bits", "success", "success_float", "enumeration_size", "wall_time_ms"])
    for n in args.n:
        D = enumerate_source("pv-mix", r=args.r, n=n)
        for rounds in args.rounds:
            for bits in args.bits:
                start = time.perf_counter()
                try:
                    res = exhaustive_protocol_search(D, rounds, bits, cap=args.cap)
                except CapExceeded as exc:
                    print(f"skip n={n} rounds={rounds} bits={bits}: {exc}", file=sys.stderr)
                    continue
                ms = round(1000 * (time.perf_counter() - start))
                out.writerow([args.r, n, rounds, bits, str(res.optimum), float(res.optimum), res.enumeration_size, ms])


if __name__ == "__main__":
    main()
