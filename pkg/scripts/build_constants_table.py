#!/usr/bin/env python3
"""Build the full calibration table (n = 5..20 and 30..100 by tens).

At the default 10^6 replicates per n this takes a few minutes; pass
--replicates 100000 for a quick, slightly noisier table.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from bdgrowth import calibration


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--replicates", type=int, default=calibration.DEFAULT_REPLICATES)
    parser.add_argument("--seed", type=int, default=20260808)
    parser.add_argument("--out", default="results/constants.csv")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    ns = list(range(5, 21)) + list(range(30, 101, 10))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = calibration.build_constants_table(
        ns, args.replicates, args.seed, path=out, workers=args.workers
    )
    print(f"{'n':>4} {'c_inv':>8} {'c_mse':>8} {'c_bias':>8} {'1/q_lo':>8} {'1/q_hi':>8}")
    for row in rows:
        print(f"{row.n:>4} {row.c_inv:8.4f} {row.c_mse:8.4f} {row.c_bias:8.4f} "
              f"{row.inv_q_lo:8.4f} {row.inv_q_hi:8.4f}")
    print(f"\nwrote {out}")


if __name__ == "__main__":
    main()
