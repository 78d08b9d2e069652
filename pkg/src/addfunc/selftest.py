"""Fast invariant checks runnable without the test suite (``addfunc selftest``)."""

from __future__ import annotations

import math

import numpy as np

from .approx import remez_best_poly
from .estimators import EstimatorConfig, Estimator, plugin_estimate, poly_estimator_values
from .phi import eval_phi, polynomial, power
from .risk import exact_bias_oracle, rate_fit
from .sampling import Histogram, distribution_zoo, poissonize_and_split, sample_multinomial
from .smoothing import SmoothedPhi, hermite_interp


def _remez_square():
    poly = remez_best_poly(lambda x: x * x, 1)
    return abs(poly.sup_error - 0.125) < 1e-6 and poly.certificate_ok()


def _factorial_moments():
    lam = 7.3
    return all(abs(exact_bias_oracle(lambda j: np.array([math.perm(int(v), m) for v in j], float),
                                     lam) / lam**m - 1) < 1e-9 for m in range(1, 8))


def _poly_unbiased():
    rng = np.random.default_rng(0)
    a = rng.normal(size=5)
    poly = remez_best_poly(polynomial(a), 4, (0.0, 0.05))
    n, p = 400, 0.03
    mean = exact_bias_oracle(lambda j: poly_estimator_values(poly, j, n), n * p)
    return abs(mean - poly(p)) <= 1e-9 * max(abs(poly(p)), 1.0)


def _hermite_matching():
    spec = power(1.2)
    ok = True
    for L in (4, 6):
        for i in range(L + 1):
            at_a = hermite_interp(spec, L, 0.02, 0.01, i, 0.02)
            ok &= abs(at_a - eval_phi(spec, i, 0.02)) <= 1e-8 * abs(eval_phi(spec, i, 0.02))
            if i:
                ok &= abs(hermite_interp(spec, L, 0.02, 0.01, i, 0.01)) <= 1e-8 * abs(
                    eval_phi(spec, i, 0.02))
    s = SmoothedPhi(spec, 6, 0.02)
    for knot in (0.01, 0.02, 1.0, 2.0):
        lo, hi = s(knot - 1e-9), s(knot + 1e-9)
        ok &= abs(lo - hi) <= 1e-6 * max(abs(lo), 1e-300)
    return bool(ok)


def _plugin_linear():
    P = distribution_zoo("zipf", 50)
    h = sample_multinomial(P, 1234, seed=3)
    return abs(plugin_estimate(power(1.0), h) - 1.0) < 1e-12


def _determinism():
    P = distribution_zoo("uniform", 200)
    cfg = EstimatorConfig(mode="hybrid4", n=500, k=200)
    est = Estimator(power(1.2), cfg)
    a = est(poissonize_and_split(P, 500, seed=11)).value
    b = est(poissonize_and_split(P, 500, seed=11)).value
    return a == b


def _rate_fit():
    n = np.array([1e3, 1e4, 1e5, 1e6])
    return abs(rate_fit(n, 5 / n)["slope"] + 1) < 1e-9


def _histogram_guard():
    try:
        Histogram(np.array([1, 2]), 4)
    except ValueError:
        return True
    return False


CHECKS = {
    "remez x^2 degree 1": _remez_square,
    "poisson factorial moments": _factorial_moments,
    "best-poly estimator unbiased": _poly_unbiased,
    "hermite matching and continuity": _hermite_matching,
    "plugin exact for linear phi": _plugin_linear,
    "seeded determinism": _determinism,
    "rate fit on exact power law": _rate_fit,
    "multinomial histogram guard": _histogram_guard,
}


def run(verbose: bool = True) -> int:
    failed = 0
    for name, check in CHECKS.items():
        try:
            ok = bool(check())
        except Exception as exc:  # noqa: BLE001 - report and continue
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        failed += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if failed == 0 else 1
