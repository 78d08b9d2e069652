"""Monte Carlo MSE and exact bias of one estimator over a sweep of n.

Example::

    python3 scripts/rate_sweep.py --mode plugin --alpha 1.6 --k 100 --trials 500
"""

import argparse
import os

import numpy as np

from addfunc import EstimatorConfig, eval_phi, power
from addfunc.risk import poisson_bias, rate_fit, run_grid
from addfunc.sampling import distribution_zoo


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mode", default="plugin")
    ap.add_argument("--alpha", type=float, default=1.6)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--dist", default="uniform")
    ap.add_argument("--n", type=int, nargs="+", default=[10**3, 10**4, 10**5, 10**6])
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    spec = power(args.alpha)
    rep = run_grid(spec, EstimatorConfig(mode=args.mode), args.n, [args.k], [args.dist],
                   args.trials, args.seed, jobs=args.jobs)
    print(f"{'n':>9} {'mse':>12} {'stderr':>10} {'mc bias':>12}")
    for c in rep.cells:
        print(f"{c.n:>9} {c.mse:12.4e} {c.stderr:10.2e} {c.bias:12.4e}")
    fit = rate_fit(args.n, [c.mse for c in rep.cells])
    print(f"MSE slope {fit['slope']:.3f}  95% band {fit['band'][0]:.3f}..{fit['band'][1]:.3f}")

    if args.mode == "plugin":
        P = distribution_zoo(args.dist, args.k).p
        exact = []
        for n in args.n:
            b = sum(poisson_bias(lambda j, n=n: eval_phi(spec, 0, j / n), spec, n, float(p))
                    for p in P)
            exact.append(abs(b))
        print("exact |bias|: " + ", ".join(f"{b:.3e}" for b in exact))
        print(f"exact bias slope {rate_fit(args.n, exact)['slope']:.3f}")


if __name__ == "__main__":
    main()
