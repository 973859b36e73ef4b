"""Agreement rate and bit cost of pointer chasing key agreement over a grid of (r, n, L)."""

import argparse
import csv
import sys

import numpy as np

from crglab.engine import run_protocol
from crglab.protocols import pointer_chasing_skg
from crglab.sources import sample_pcs_batch, sample_pcs_product


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, nargs="+", default=[1, 3, 5])
    ap.add_argument("--n", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--L", type=int, nargs="+", default=[1, 8])
    ap.add_argument("--draws", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout)
    out.writerow(["r", "n", "L", "draws", "agree_pcs", "agree_product", "bits", "rounds"])
    for r in args.r:
        for n in args.n:
            for L in args.L:
                rng = np.random.default_rng([args.seed, r, n, L])
                spec = pointer_chasing_skg(r, n, L)
                recs = [run_protocol(spec, s.alice, s.bob) for s in sample_pcs_batch(r, n, L, args.draws, rng)]
                prod = [sample_pcs_product(r, n, L, rng) for _ in range(args.draws)]
                agree_prod = sum(run_protocol(spec, s.alice, s.bob).agree for s in prod)
                out.writerow([
                    r, n, L, args.draws,
                    sum(rec.agree for rec in recs) / args.draws,
                    agree_prod / args.draws,
                    max(rec.bits_used for rec in recs),
                    max(rec.rounds_used for rec in recs),
                ])


if __name__ == "__main__":
    main()
