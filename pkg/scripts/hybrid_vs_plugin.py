"""Compare every estimator mode on the same grid and print MSE per cell.

Example::

    python3 scripts/hybrid_vs_plugin.py --alpha 1.2 --k 1000 10000 --n 1000 10000
"""

import argparse
import os

from addfunc import EstimatorConfig, power
from addfunc.estimators import MODES
from addfunc.risk import run_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.2)
    ap.add_argument("--k", type=int, nargs="+", default=[1000, 10000])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 10000])
    ap.add_argument("--dist", default="uniform")
    ap.add_argument("--modes", nargs="+", default=list(MODES))
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    spec = power(args.alpha)
    rows = {}
    for mode in args.modes:
        # regime guards are bypassed so every mode can be compared on one grid
        rep = run_grid(spec, EstimatorConfig(mode=mode, force=True), args.n, args.k,
                       [args.dist], args.trials, args.seed, jobs=args.jobs)
        for c in rep.cells:
            rows.setdefault((c.k, c.n), {})[mode] = c.mse
    print(f"{'k':>7} {'n':>7} " + " ".join(f"{m:>11}" for m in args.modes))
    for (k, n), by_mode in sorted(rows.items()):
        print(f"{k:>7} {n:>7} " + " ".join(f"{by_mode[m]:11.3e}" for m in args.modes))


if __name__ == "__main__":
    main()
