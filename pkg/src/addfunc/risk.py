"""Monte Carlo risk, exact Poisson expectations, rate fits and the two-point bound."""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing as mp
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .estimators import HYBRID_MODES, Estimator, EstimatorConfig
from .phi import PhiSpec, ProbabilityVector, as_prob, eval_phi, theta_true
from .sampling import (distribution_zoo, make_rng, poissonize_and_split, sample_multinomial,
                       sample_poisson)

CSV_COLUMNS = ("n", "k", "dist", "mode", "trials", "bias", "var", "mse", "stderr", "seed")
SAMPLING = ("poisson", "multinomial")
BOOTSTRAP_RESAMPLES = 200


class OracleError(ArithmeticError):
    pass


# -- exact Poisson expectations -------------------------------------------------


def poisson_support(lam: float, tail_tol: float = 1e-14):
    """Integers j and normalized weights P(Poi(lam) = j) covering 1 - tail_tol."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    lo = int(stats.poisson.ppf(tail_tol / 2, lam))
    hi = int(stats.poisson.isf(tail_tol / 2, lam)) + 1
    j = np.arange(max(lo - 1, 0), hi + 1)
    w = np.exp(stats.poisson.logpmf(j, lam))
    return j, w / math.fsum(w)


def exact_bias_oracle(fn, lam: float, tail_tol: float = 1e-14) -> float:
    """sum_j P(Poi(lam) = j) fn(j), truncated to tail mass below ``tail_tol``.

    ``fn`` is called once with the integer array of support points.
    """
    j, w = poisson_support(lam, tail_tol)
    with np.errstate(over="raise", invalid="raise"):
        try:
            v = np.asarray(fn(j), dtype=float)
        except FloatingPointError as exc:
            raise OracleError(f"fn overflowed on support [{j[0]}, {j[-1]}]") from exc
    if not np.all(np.isfinite(v)):
        bad = int(j[~np.isfinite(v)][0])
        raise OracleError(f"fn is not finite at j={bad} (support truncated at {j[-1]})")
    return math.fsum(w * v)


def poisson_bias(fn, spec: PhiSpec, n: float, p: float, tail_tol: float = 1e-14) -> float:
    """E[fn(N)] - phi(p) for N ~ Poi(np).

    The linear Taylor part phi(p) + phi'(p)(N/n - p), whose mean is exactly
    phi(p), is subtracted inside the sum so that tiny biases are not lost to
    cancellation against phi(p).
    """
    a = eval_phi(spec, 0, p)
    b = eval_phi(spec, 1, p) if p > 0 else 0.0
    return exact_bias_oracle(lambda j: np.asarray(fn(j)) - a - b * (j / n - p), n * p, tail_tol)


def poisson_variance(fn, n: float, p: float, tail_tol: float = 1e-14) -> float:
    """Var[fn(N)] for N ~ Poi(np), from centered exact moments."""
    j, w = poisson_support(n * p, tail_tol)
    v = np.asarray(fn(j), dtype=float)
    ref = v[np.argmax(w)]
    d = v - ref
    m1 = math.fsum(w * d)
    return max(math.fsum(w * d * d) - m1 * m1, 0.0)


# -- Monte Carlo ----------------------------------------------------------------


@dataclass
class CellResult:
    n: int
    k: int
    dist: str
    mode: str
    trials: int
    theta: float
    mean: float
    bias: float
    var: float
    mse: float
    stderr: float
    seed: int
    sampling: str = "poisson"
    size_ratio: float = float("nan")  # n ln k / k^(1/alpha)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def cell_seed(seed: int, cell: int) -> int:
    """64-bit seed of one grid cell, derived from the master seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(cell),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw(P, n: int, mode: str, rng, sampling: str = "poisson"):
    """Sample data of the shape ``mode`` expects."""
    if mode in HYBRID_MODES:
        return poissonize_and_split(P, n, rng)
    if sampling == "poisson":
        return sample_poisson(P, n, rng)
    if sampling == "multinomial":
        return sample_multinomial(P, n, rng)
    raise ValueError(f"unknown sampling {sampling!r}; expected one of {SAMPLING}")


def estimates(spec: PhiSpec, P, cfg: EstimatorConfig, trials: int, seed: int,
              sampling: str = "poisson") -> np.ndarray:
    """Estimates from ``trials`` independent draws; trial t uses stream (seed, t)."""
    est = Estimator(spec, cfg)
    return np.array([est(draw(P, cfg.n, cfg.mode, make_rng(seed, t), sampling)).value
                     for t in range(trials)])


def summarize(values, theta: float) -> dict:
    """bias, population variance, MSE and the standard error of the mean."""
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / v.size
    d = v - mean
    var = math.fsum(d * d) / v.size
    e = v - theta
    mse = math.fsum(e * e) / v.size
    stderr = math.sqrt(var * v.size / (v.size - 1) / v.size)
    return {"mean": mean, "bias": mean - theta, "var": var, "mse": mse, "stderr": stderr}


def monte_carlo_risk(spec: PhiSpec, P, cfg: EstimatorConfig, trials: int, seed: int, *,
                     dist: str = "custom", sampling: str = "poisson") -> CellResult:
    """Bias, variance and MSE of ``cfg.mode`` against theta(P; phi).

    Estimator errors are recorded in ``error`` instead of raised.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    P = as_prob(P)
    theta = theta_true(spec, P)
    ratio = cfg.n * math.log(P.k) / P.k ** (1 / spec.alpha) if spec.alpha > 0 else float("nan")
    base = dict(n=cfg.n, k=P.k, dist=dist, mode=cfg.mode, trials=trials, theta=theta,
                seed=int(seed), sampling=sampling, size_ratio=ratio)
    try:
        s = summarize(estimates(spec, P, cfg, trials, seed, sampling), theta)
    except Exception as exc:  # noqa: BLE001 - a failing cell is data
        nan = float("nan")
        return CellResult(mean=nan, bias=nan, var=nan, mse=nan, stderr=nan,
                          error=f"{type(exc).__name__}: {exc}", **base)
    return CellResult(**s, **base)


# -- grids and reports ----------------------------------------------------------


@dataclass
class RiskReport:
    spec_id: str
    mode: str
    seed: int
    cells: list = field(default_factory=list)
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            w.writerow([c.n, c.k, c.dist, c.mode, c.trials, repr(c.bias), repr(c.var),
                        repr(c.mse), repr(c.stderr), c.seed])
        return buf.getvalue()

    def summary(self, with_timing: bool = False) -> dict:
        out = {"spec": self.spec_id, "mode": self.mode, "seed": self.seed,
               "config": self.config, "cells": [asdict(c) for c in self.cells],
               "slopes": report_rate_fit(self, "n")}
        if with_timing:
            out["wall_clock"] = self.wall_clock
        return out

    def groups(self) -> dict:
        """Cells grouped by (k, dist) and ordered by n."""
        g = {}
        for c in self.cells:
            g.setdefault(f"k={c.k},dist={c.dist}", []).append(c)
        return {key: sorted(v, key=lambda c: c.n) for key, v in g.items()}

    def plot_data(self) -> str:
        """Whitespace-separated blocks ``n mse stderr``, one per (k, dist)."""
        lines = []
        for key, group in self.groups().items():
            lines.append(f"# {key}")
            lines.extend(f"{c.n} {c.mse!r} {c.stderr!r}" for c in group)
            lines.append("")
            lines.append("")
        return "\n".join(lines)


_POOL_JOB = None


def _run_indexed(i):
    spec, cells, trials, sampling = _POOL_JOB
    cfg, P, seed, dist = cells[i]
    return monte_carlo_risk(spec, P, cfg, trials, seed, dist=dist, sampling=sampling)


def run_grid(spec: PhiSpec, base: EstimatorConfig, n_grid, k_grid, dists, trials: int,
             seed: int, *, jobs: int = 1, sampling: str = "poisson",
             dist_params: dict | None = None) -> RiskReport:
    """Monte Carlo risk over the product grid dists x k x n.

    Cells are seeded from (seed, cell index), so the report does not depend on
    ``jobs``.
    """
    global _POOL_JOB
    if not n_grid or not k_grid or not dists:
        raise ValueError("grids must be nonempty")
    dist_params = dist_params or {}
    cells = []
    for dist in dists:
        for k in k_grid:
            P = distribution_zoo(dist, int(k), **dist_params.get(dist, {}))
            for n in n_grid:
                cfg = replace(base, n=int(n), k=int(k))
                cells.append((cfg, P, cell_seed(seed, len(cells)), dist))
    t0 = time.perf_counter()
    if jobs > 1 and len(cells) > 1:
        _POOL_JOB = (spec, cells, trials, sampling)
        try:
            ctx = mp.get_context("fork")
            with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
                results = list(pool.map(_run_indexed, range(len(cells))))
        finally:
            _POOL_JOB = None
    else:
        results = [monte_carlo_risk(spec, P, cfg, trials, s, dist=d, sampling=sampling)
                   for cfg, P, s, d in cells]
    return RiskReport(spec_id=spec.name, mode=base.mode, seed=int(seed), cells=results,
                      wall_clock=time.perf_counter() - t0)


# -- rate fits ------------------------------------------------------------------


def rate_fit(x, y, covariate=None, seed: int = 0, resamples: int = BOOTSTRAP_RESAMPLES) -> dict:
    """OLS slope of log y on log x, with a bootstrap 95% band.

    ``covariate="nlogn"`` replaces x by x ln x.  Nonpositive or non-finite y
    are dropped with a warning.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if covariate == "nlogn":
        x = x * np.log(x)
    elif covariate is not None:
        raise ValueError(f"unknown covariate {covariate!r}")
    keep = np.isfinite(y) & (y > 0)
    if not keep.all():
        warnings.warn(f"rate_fit: dropping {int((~keep).sum())} nonpositive cells", stacklevel=2)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 2 or np.ptp(lx) == 0:
        raise ValueError("rate_fit needs at least two distinct x values")
    slope, intercept = np.polyfit(lx, ly, 1)
    rng = make_rng(seed)
    boot = []
    for _ in range(resamples):
        idx = rng.integers(0, lx.size, lx.size)
        if np.ptp(lx[idx]) > 0:
            boot.append(np.polyfit(lx[idx], ly[idx], 1)[0])
    band = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5))) if boot \
        else (float(slope), float(slope))
    return {"slope": float(slope), "intercept": float(intercept), "band": list(band)}


def report_rate_fit(report: RiskReport, x: str = "n", **kw) -> dict:
    """rate_fit of MSE along n (fixed k) or k (fixed n) for each group of cells."""
    if x not in ("n", "k"):
        raise ValueError("x must be 'n' or 'k'")
    other = "k" if x == "n" else "n"
    groups = {}
    for c in report.cells:
        if not c.failed:
            groups.setdefault((c.dist, getattr(c, other)), []).append(c)
    out = {}
    for (dist, val), cs in sorted(groups.items()):
        if len({getattr(c, x) for c in cs}) < 4:
            continue
        out[f"{dist},{other}={val}"] = rate_fit([getattr(c, x) for c in cs],
                                                 [c.mse for c in cs], **kw)
    return out


# -- two-point lower bound ------------------------------------------------------


def two_point(k: int, p: float) -> ProbabilityVector:
    return distribution_zoo("two_point", k, p=p)


def two_point_kl(p: float, q: float) -> float:
    """KL(P || Q) for P = (1-p, p/(k-1), ...), Q likewise; k cancels."""
    def term(a, b):
        return 0.0 if a == 0 else a * math.log(a / b)
    return term(1 - p, 1 - q) + term(p, q)


def lecam_two_point(spec: PhiSpec, n: int, k: int, p: float, q: float) -> dict:
    """Two-point bound (1/4)(theta(P) - theta(Q))^2 exp(-n KL(P, Q)).

    Also reports chi^2(P, Q)/2, an upper bound on the KL divergence.
    """
    if k < 3:
        raise ValueError("k must be >= 3")
    if not (0 < p < 1 and 0 < q < 1):
        raise ValueError("p and q must lie in (0, 1)")
    dtheta = abs(theta_true(spec, two_point(k, p)) - theta_true(spec, two_point(k, q)))
    kl = two_point_kl(p, q)
    chi2 = (p - q) ** 2 / (q * (1 - q))
    return {"delta_theta": dtheta, "kl": kl, "chi2_half": chi2 / 2,
            "bound": 0.25 * dtheta**2 * math.exp(-n * kl)}


def dumps(obj) -> str:
    """Deterministic JSON (sorted keys, NaN as null)."""
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, np.generic):
            return clean(o.item())
        return o
    return json.dumps(clean(obj), sort_keys=True, indent=2)
