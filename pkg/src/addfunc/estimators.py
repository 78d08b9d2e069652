"""Estimators of the additive functional theta(P; phi) = sum_i phi(p_i).

Modes
-----
plugin    sum_i phi(N_i / n)
plugin2   second-order bias-corrected plugin on H_{4,Delta}[phi]
plugin4   fourth-order bias-corrected plugin on H_{6,Delta}[phi]
poly_only unbiased estimate of the best polynomial on [0, 4 Delta], truncated
hybrid2   per-symbol switch between poly and plugin2, chosen by an independent
          histogram (for 0 < alpha < 1)
hybrid4   the same with plugin4 (for 1 < alpha < 3/2)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .approx import Polynomial, cached_best_poly
from .phi import PhiSpec, canonicalize, eval_phi
from .sampling import POISSONIZED, Histogram, SplitHistograms, make_rng
from .smoothing import SmoothedPhi, smoothed_eval

MODES = ("hybrid4", "hybrid2", "plugin", "plugin2", "plugin4", "poly_only")
HYBRID_MODES = ("hybrid2", "hybrid4")
REGIMES = {"hybrid4": (1.0, 1.5), "hybrid2": (0.0, 1.0)}
SMOOTHING_ORDER = {"plugin2": 4, "hybrid2": 4, "plugin4": 6, "hybrid4": 6}

# Coefficients (c2, c3, c4a, c4b) of the fourth-order corrected plugin
#   H(x) - c2 x H''/n - c3 x H'''/n^2 - c4a x H''''/n^3 - c4b x^2 H''''/n^2,
# x = N/n.  They cancel the Poisson bias of H(x) through order n^-2 (and the
# p phi''''/n^3 term), leaving O(n^-3).
FOURTH_ORDER = (1 / 2, -1 / 3, 1 / 4, -1 / 8)

CLAMP_RANGES = ("poly_interval", "delta")

PRACTICAL_C1 = 0.6
PRACTICAL_C2 = 1.0


class ConfigError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    """Mode and tuning constants; derived thresholds are properties.

    Delta_count = C2 ln n is the switching threshold in counts and
    L = floor(C1 ln n), clamped to >= 1, the polynomial degree.  The default
    constants are practical values; ``strict_theory`` enforces the asymptotic
    constraints 6 C1 ln 2 + 4 sqrt(C1 C2)(1 + ln 2) <= 3 - 2 alpha and
    C2 > 16 alpha, which at any realistic n force L = 0 before clamping.
    """

    mode: str = "hybrid4"
    n: float = 1
    k: int = 1
    C1: float = PRACTICAL_C1
    C2: float = PRACTICAL_C2
    strict_theory: bool = False
    force: bool = False
    threshold: float | None = None  # override of 2 Delta_count (selector counts)
    clamp_range: str = "poly_interval"  # or "delta": clamp to phi's range on [0, Delta]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.C1 <= 0 or self.C2 <= 0:
            raise ConfigError("C1 and C2 must be positive")
        if self.n < 1 or self.k < 1:
            raise ConfigError("n and k must be >= 1")
        if self.clamp_range not in CLAMP_RANGES:
            raise ConfigError(f"clamp_range must be one of {CLAMP_RANGES}")

    @property
    def delta_count(self) -> float:
        return self.C2 * math.log(self.n) if self.n > 1 else self.C2

    @property
    def delta_prob(self) -> float:
        return min(self.delta_count / self.n, 1.0)

    @property
    def L(self) -> int:
        return max(1, int(math.floor(self.C1 * math.log(self.n)))) if self.n > 1 else 1

    @property
    def poly_interval(self) -> tuple[float, float]:
        return (0.0, min(4.0 * self.delta_count / self.n, 1.0))

    @property
    def clamp_interval(self) -> tuple[float, float]:
        """Interval whose phi-range bounds the polynomial branch.

        "delta" uses [0, Delta_count/n].  The default uses the approximation
        interval [0, 4 Delta_count/n]: symbols routed to the polynomial branch
        routinely have p up to about 2 Delta/n, and clamping them to
        phi(Delta/n) costs far more bias than it saves variance at practical n.
        """
        if self.clamp_range == "delta":
            return (0.0, self.delta_prob)
        return self.poly_interval

    @property
    def switch_at(self) -> float:
        return 2.0 * self.delta_count if self.threshold is None else self.threshold

    def smoothing_delta(self) -> float:
        # the Hermite blend needs Delta < 1
        return min(self.delta_prob, 0.5)

    def validate(self, spec: PhiSpec) -> None:
        """Raise ConfigError on a mode/phi mismatch or infeasible strict constants."""
        if self.mode in REGIMES and not self.force:
            lo, hi = REGIMES[self.mode]
            if not lo < spec.alpha < hi:
                raise ConfigError(
                    f"mode {self.mode} needs alpha in ({lo}, {hi}); phi has alpha={spec.alpha} "
                    "(set force=True to override)")
        need = SMOOTHING_ORDER.get(self.mode, 0)
        if spec.max_order < need:
            raise ConfigError(f"mode {self.mode} needs derivatives up to order {need}")
        if self.strict_theory:
            a = spec.alpha
            lhs = 6 * self.C1 * math.log(2) + 4 * math.sqrt(self.C1 * self.C2) * (1 + math.log(2))
            if lhs > 3 - 2 * a or not self.C2 > 16 * a:
                raise ConfigError(
                    f"strict_theory: constants C1={self.C1}, C2={self.C2} violate "
                    f"6C1 ln2 + 4 sqrt(C1 C2)(1+ln2) = {lhs:.4g} <= {3 - 2 * a:.4g} "
                    f"and C2 > {16 * a:.4g}")
        if self.mode in HYBRID_MODES + ("poly_only",):
            if 2 * self.delta_count**3 * self.L > self.n:
                warnings.warn(
                    f"2 Delta^3 L = {2 * self.delta_count ** 3 * self.L:.3g} exceeds n={self.n}; "
                    "the polynomial variance bound does not apply", stacklevel=2)


# -- elementary pieces ----------------------------------------------------------


def falling_factorial(N: int, m: int) -> int:
    """N (N-1) ... (N-m+1), zero when m > N."""
    if N < 0 or m < 0:
        raise ValueError("N and m must be nonnegative")
    return math.perm(N, m)


def plugin_estimate(spec: PhiSpec, hist: Histogram) -> float:
    """sum_i phi(N_i / n).

    Multinomial histograms divide by the sample size; Poissonized ones by the
    intensity n, matching the Poisson-model analysis.
    """
    n = hist.n
    if n <= 0:
        raise InsufficientDataError("plugin estimate needs n >= 1")
    return _sum_by_count(hist.counts, lambda c: eval_phi(spec, 0, c / n))


def phi_range(spec: PhiSpec, hi: float, size: int = 10_000) -> tuple[float, float]:
    """(inf, sup) of phi on [0, hi] over a grid graded toward 0."""
    u = np.linspace(0.0, 1.0, size)
    g = np.unique(np.concatenate((hi * u, hi * u**4)))
    v = eval_phi(spec, 0, g)
    return float(v.min()), float(v.max())


def poly_estimator_values(poly: Polynomial, counts, n: float) -> np.ndarray:
    """Unclamped sum_m a_m (N)_m / n^m for each entry of ``counts``.

    Each term is assembled in log-magnitude as b_m prod_{j<m} (N - j)/(n hi)
    with b_m = a_m hi^m, then summed with compensated summation.
    """
    counts = np.asarray(counts, dtype=np.int64)
    b = poly.scaled_coeffs()
    hi = poly.interval[1]
    scale = n * hi
    uniq, inv = np.unique(counts, return_inverse=True)
    logb = np.log(np.abs(np.where(b == 0, 1.0, b)))
    vals = np.empty(uniq.size)
    for t, N in enumerate(uniq):
        terms = []
        logprod = 0.0
        for m, bm in enumerate(b):
            if m > 0:
                if N - (m - 1) <= 0:
                    break
                logprod += math.log((N - (m - 1)) / scale)
            if bm != 0.0:
                terms.append(math.copysign(math.exp(logb[m] + logprod), bm))
        vals[t] = math.fsum(terms)
    return vals[inv].reshape(counts.shape)


def best_poly_estimate(poly: Polynomial, N: int, n: float, truncation=None) -> float:
    """Truncated unbiased estimator of the best polynomial at p = N/n.

    ``truncation`` is ``(phi_inf, phi_sup)``; pass ``None`` for the raw,
    exactly unbiased value.
    """
    v = float(poly_estimator_values(poly, [N], n)[0])
    if truncation is None:
        return v
    lo, hi = truncation
    return min(max(v, lo), hi)


def bias_corrected2(s: SmoothedPhi, N, n: float):
    """H(N/n) - N/(2 n^2) H''(N/n) on the order-4 smoothed phi."""
    N = np.asarray(N, dtype=float)
    x = N / n
    out = smoothed_eval(s, 0, x) - N / (2 * n * n) * smoothed_eval(s, 2, x)
    return float(out) if out.ndim == 0 else out


def bias_corrected4(s: SmoothedPhi, N, n: float, coeffs=FOURTH_ORDER):
    """Fourth-order bias-corrected plugin on the order-6 smoothed phi.

    With x = N/n and H = H_{6,Delta}[phi],
    H(x) - c2 x H''/n - c3 x H'''/n^2 - c4a x H''''/n^3 - c4b x^2 H''''/n^2.
    """
    c2, c3, c4a, c4b = coeffs
    N = np.asarray(N, dtype=float)
    x = N / n
    h4 = smoothed_eval(s, 4, x)
    out = (smoothed_eval(s, 0, x)
           - c2 * x / n * smoothed_eval(s, 2, x)
           - c3 * x / n**2 * smoothed_eval(s, 3, x)
           - c4a * x / n**3 * h4
           - c4b * x * x / n**2 * h4)
    return float(out) if out.ndim == 0 else out


def _sum_by_count(counts, fn) -> float:
    """sum_i fn(counts_i) evaluating fn once per distinct count, fixed order."""
    uniq, mult = np.unique(np.asarray(counts), return_counts=True)
    vals = np.asarray(fn(uniq.astype(float)), dtype=float)
    return math.fsum(vals * mult)


# -- assembled estimators -------------------------------------------------------


@dataclass
class EstimateResult:
    value: float
    branch_counts: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"value": self.value, "branch_counts": dict(self.branch_counts),
                "diagnostics": dict(self.diagnostics)}


class Estimator:
    """An estimator bound to (phi, config); per-count values are memoized.

    Polynomials, truncation bounds and smoothed functions are built lazily so
    that a Monte Carlo cell pays for them once.
    """

    def __init__(self, spec: PhiSpec, cfg: EstimatorConfig, canonical: bool = True):
        cfg.validate(spec)
        self.raw_spec = spec
        self.spec = canonicalize(spec, cfg.k) if canonical else spec
        self.cfg = cfg

    @cached_property
    def poly(self) -> Polynomial:
        return cached_best_poly(self.spec, self.cfg.L, self.cfg.poly_interval)

    @cached_property
    def truncation(self) -> tuple[float, float]:
        return phi_range(self.spec, self.cfg.clamp_interval[1])

    @cached_property
    def smoothed(self) -> SmoothedPhi:
        L = SMOOTHING_ORDER[self.cfg.mode]
        return SmoothedPhi(self.spec, L, self.cfg.smoothing_delta())

    def poly_values(self, counts, n: float) -> np.ndarray:
        lo, hi = self.truncation
        return np.clip(poly_estimator_values(self.poly, counts, n), lo, hi)

    def corrected_values(self, counts, n: float) -> np.ndarray:
        counts = np.asarray(counts, dtype=float)
        if SMOOTHING_ORDER[self.cfg.mode] == 4:
            return np.asarray(bias_corrected2(self.smoothed, counts, n), dtype=float)
        return np.asarray(bias_corrected4(self.smoothed, counts, n), dtype=float)

    def __call__(self, data) -> EstimateResult:
        cfg = self.cfg
        mode = cfg.mode
        if mode in HYBRID_MODES:
            if not isinstance(data, SplitHistograms):
                raise ConfigError(f"mode {mode} needs split histograms")
            return self._hybrid(data)
        hist = data.primary if isinstance(data, SplitHistograms) else data
        n = hist.n
        if n <= 0:
            raise InsufficientDataError("estimate needs n >= 1")
        counts = hist.counts
        if mode == "plugin":
            value = plugin_estimate(self.spec, hist)
            branches = {"plugin": hist.k}
        elif mode in ("plugin2", "plugin4"):
            value = _sum_by_count(counts, lambda c: self.corrected_values(c, n))
            branches = {"plugin": hist.k}
        else:  # poly_only
            value = _sum_by_count(counts, lambda c: self.poly_values(c, n))
            branches = {"poly": hist.k}
        return EstimateResult(value, branches, self._diagnostics())

    def _hybrid(self, split: SplitHistograms) -> EstimateResult:
        n = split.base_n
        N = split.primary.counts
        use_plugin = split.selector.counts >= self.cfg.switch_at
        parts = []
        if use_plugin.any():
            parts.append(_sum_by_count(N[use_plugin], lambda c: self.corrected_values(c, n)))
        if (~use_plugin).any():
            parts.append(_sum_by_count(N[~use_plugin], lambda c: self.poly_values(c, n)))
        branches = {"plugin": int(use_plugin.sum()), "poly": int((~use_plugin).sum())}
        return EstimateResult(math.fsum(parts), branches, self._diagnostics())

    def _diagnostics(self) -> dict:
        cfg = self.cfg
        d = {"mode": cfg.mode, "n": cfg.n, "k": cfg.k, "delta_count": cfg.delta_count,
             "delta_prob": cfg.delta_prob, "L": cfg.L, "C1": cfg.C1, "C2": cfg.C2,
             "canonicalized": self.spec is not self.raw_spec}
        if cfg.mode in HYBRID_MODES + ("poly_only",):
            d["poly_interval"] = list(cfg.poly_interval)
            d["poly_sup_error"] = self.poly.sup_error
            d["truncation"] = list(self.truncation)
            d["clamp_range"] = cfg.clamp_range
        if cfg.mode in SMOOTHING_ORDER:
            d["smoothing_delta"] = cfg.smoothing_delta()
        return d


def hybrid_estimate(spec: PhiSpec, split: SplitHistograms, cfg: EstimatorConfig) -> float:
    if cfg.mode not in HYBRID_MODES:
        raise ConfigError("hybrid_estimate needs mode hybrid2 or hybrid4")
    return Estimator(spec, cfg)(split).value


def split_histogram(hist: Histogram, seed=0) -> SplitHistograms:
    """Split observed counts into two halves by fair coin flips per sample.

    Used when only one histogram is available (e.g. a data file); each half is
    treated as Poissonized with intensity n/2.
    """
    rng = make_rng(seed)
    a = rng.binomial(hist.counts, 0.5)
    half = hist.n / 2
    return SplitHistograms(Histogram(a, half, POISSONIZED),
                           Histogram(hist.counts - a, half, POISSONIZED), half)


def estimate(spec: PhiSpec, data, cfg: EstimatorConfig | None = None, *, seed=0,
             **overrides) -> EstimateResult:
    """Dispatch on ``cfg.mode``.

    ``data`` is a Histogram or SplitHistograms.  When a hybrid mode receives a
    single histogram it is split with :func:`split_histogram`.  ``n`` and ``k``
    in the config default to the data's.
    """
    if cfg is None:
        cfg = EstimatorConfig(**overrides) if "n" in overrides else None
    hist = data.primary if isinstance(data, SplitHistograms) else data
    n = data.base_n if isinstance(data, SplitHistograms) else hist.n
    if cfg is None:
        cfg = EstimatorConfig(n=max(n, 1), k=hist.k, **overrides)
    elif overrides:
        cfg = replace(cfg, **overrides)
    if cfg.mode in HYBRID_MODES and not isinstance(data, SplitHistograms):
        if hist.n < 2:
            raise InsufficientDataError("hybrid modes need at least 2 samples")
        data = split_histogram(hist, seed)
        cfg = replace(cfg, n=data.base_n)
    return Estimator(spec, cfg)(data)
