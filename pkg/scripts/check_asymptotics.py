#!/usr/bin/env python3
"""Large-sample variance check: Var(sqrt(n)(r_hat - r)) under the large-n
regime against the 4 - pi^2/3 (calibrated pairwise) and 1.0 (lengths)
limits, at a few sample sizes."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from bdgrowth import harness
from bdgrowth.rng import RngStream


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", default="200,500,1000")
    parser.add_argument("--r", type=float, default=1.0)
    parser.add_argument("--replicates", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=20260808)
    args = parser.parse_args()

    print(f"{'n':>6} {'var(pairwise)':>14} {'target':>8} {'var(lengths)':>13} "
          f"{'target':>8} {'KS p':>7}")
    for i, n_text in enumerate(args.n.split(",")):
        n = int(n_text)
        rep = harness.asymptotics_check(n, args.r, args.replicates,
                                        RngStream(args.seed).child(i))
        print(f"{n:>6} {rep.var_scaled_inv:>14.4f} {rep.target_inv:>8.4f} "
              f"{rep.var_scaled_lengths:>13.4f} {rep.target_lengths:>8.4f} "
              f"{rep.ks_pvalue_inv:>7.3f}")


if __name__ == "__main__":
    main()
