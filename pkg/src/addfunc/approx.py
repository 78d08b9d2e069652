"""Best uniform polynomial approximation and moduli of smoothness.

The Remez exchange runs on a discrete candidate grid graded toward the left
endpoint (x = lo + (hi - lo) u**2 with u Chebyshev-distributed on [0, 1]), and
every reference point is polished by a bounded scalar search before the next
exchange.  Internally the polynomial lives in the Chebyshev basis of the
interval; monomial coefficients are derived for the public record.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import minimize_scalar

from .phi import PhiSpec, eval_phi

CACHE_ENV = "ADDFUNC_CACHE_DIR"


class RemezError(RuntimeError):
    """Exchange did not converge; ``best`` holds the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class ApproxDomainError(ValueError):
    pass


@dataclass
class Polynomial:
    """Degree-L polynomial on ``interval`` with its approximation metadata.

    ``coeffs`` are monomial coefficients a_0..a_L in the original variable.
    ``cheb`` (when present) holds the same polynomial in the Chebyshev basis of
    ``interval`` and is used for evaluation.  ``alternation`` and
    ``alternation_errors`` form the equioscillation certificate.
    """

    coeffs: np.ndarray
    interval: tuple[float, float]
    sup_error: float
    cheb: np.ndarray | None = None
    alternation: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alternation_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    converged: bool = True

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        if self.cheb is not None:
            lo, hi = self.interval
            return C.chebval(_to_unit(np.asarray(x, dtype=float), lo, hi), self.cheb)
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def scaled_coeffs(self) -> np.ndarray:
        """Coefficients b_m = a_m * hi**m of the polynomial in u = x / hi."""
        hi = self.interval[1]
        return np.asarray(self.coeffs) * hi ** np.arange(self.degree + 1)

    def certificate_ok(self, rtol: float = 1e-6) -> bool:
        """Strictly alternating signs on >= L+2 points at level sup_error."""
        e = np.asarray(self.alternation_errors)
        if e.size < self.degree + 2:
            return False
        s = np.sign(e)
        if np.any(s == 0) or np.any(s[1:] == s[:-1]):
            return False
        return bool(np.all(np.abs(np.abs(e) - self.sup_error) <= rtol * self.sup_error))

    def to_record(self) -> dict:
        rec = {
            "degree": self.degree,
            "interval": [float(self.interval[0]), float(self.interval[1])],
            "coeffs": [float(c) for c in self.coeffs],
            "sup_error": float(self.sup_error),
        }
        if self.cheb is not None:
            rec["cheb_coeffs"] = [float(c) for c in self.cheb]
        if len(self.alternation):
            rec["alternation"] = [float(x) for x in self.alternation]
            rec["alternation_errors"] = [float(x) for x in self.alternation_errors]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Polynomial":
        coeffs = np.asarray(rec["coeffs"], dtype=float)
        if rec["degree"] != len(coeffs) - 1:
            raise ValueError("degree does not match coefficient count")
        cheb = rec.get("cheb_coeffs")
        return cls(
            coeffs=coeffs,
            interval=(float(rec["interval"][0]), float(rec["interval"][1])),
            sup_error=float(rec["sup_error"]),
            cheb=None if cheb is None else np.asarray(cheb, dtype=float),
            alternation=np.asarray(rec.get("alternation", []), dtype=float),
            alternation_errors=np.asarray(rec.get("alternation_errors", []), dtype=float),
        )


def _to_unit(x, lo, hi):
    return (2.0 * x - (lo + hi)) / (hi - lo)


def _as_callable(f) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(f, PhiSpec):
        return lambda x: eval_phi(f, 0, np.asarray(x, dtype=float))
    return lambda x: np.asarray(f(np.asarray(x, dtype=float)), dtype=float)


def candidate_grid(lo: float, hi: float, size: int) -> np.ndarray:
    """Chebyshev nodes in u, squared to cluster toward ``lo``."""
    u = 0.5 * (1.0 - np.cos(np.pi * np.arange(size) / (size - 1)))
    x = lo + (hi - lo) * u * u
    x[0], x[-1] = lo, hi
    return x


def _solve_reference(f_ref, s_ref, degree):
    n = degree + 2
    A = np.empty((n, n))
    A[:, : degree + 1] = C.chebvander(s_ref, degree)
    A[:, -1] = (-1.0) ** np.arange(n)
    sol = np.linalg.solve(A, f_ref)
    return sol[:-1], sol[-1]


def _alternating_extrema(err):
    """Index of the largest |err| in every maximal run of constant sign."""
    s = np.sign(err)
    s[s == 0] = 1
    breaks = np.flatnonzero(s[1:] != s[:-1]) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [err.size]))
    a = np.abs(err)
    return [int(st + np.argmax(a[st:en])) for st, en in zip(starts, ends)]


def _reduce_reference(idx, err, need):
    """Drop extrema until ``need`` alternating points remain, keeping the largest."""
    idx = list(idx)
    while len(idx) > need:
        mags = [abs(err[i]) for i in idx]
        if len(idx) - need == 1:
            # drop the smaller end point; interior removal would break alternation
            if mags[0] < mags[-1]:
                idx.pop(0)
            else:
                idx.pop()
            continue
        j = int(np.argmin(mags))
        if j == 0 or j == len(idx) - 1:
            idx.pop(j)
        else:
            # removing a pair of neighbours preserves alternation
            partner = j - 1 if mags[j - 1] < mags[j + 1] else j + 1
            for t in sorted((j, partner), reverse=True):
                idx.pop(t)
    return idx


def remez_best_poly(
    f,
    degree: int,
    interval: Sequence[float] = (0.0, 1.0),
    *,
    grid_size: int | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> Polynomial:
    """Best uniform approximation of ``f`` on ``interval`` by a degree-L polynomial.

    Parameters
    ----------
    f : PhiSpec or callable
        Continuous function on the interval, vectorized over numpy arrays.
    degree : int
        Polynomial degree L >= 0.
    interval : (lo, hi)
        Approximation interval with 0 <= lo < hi <= 1 for a PhiSpec.
    grid_size : int, optional
        Candidate grid size; defaults to max(2048, 64 L**2).
    tol : float
        Stop when (grid max error - levelled error) <= tol * grid max error.

    Returns
    -------
    Polynomial
        With ``sup_error`` the achieved maximum deviation and an alternation
        certificate of L+2 points.

    Raises
    ------
    RemezError
        No convergence within ``max_iter`` exchanges (``err.best`` attached).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ApproxDomainError(f"degenerate interval [{lo}, {hi}]")
    if isinstance(f, PhiSpec) and (lo < 0 or hi > 1):
        raise ApproxDomainError("phi is approximated on subintervals of [0, 1]")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    func = _as_callable(f)
    L = int(degree)
    need = L + 2
    m = grid_size or max(2048, 64 * L * L)
    x = candidate_grid(lo, hi, m)
    fx = func(x)
    s = _to_unit(x, lo, hi)
    scale = max(float(np.max(np.abs(fx))), np.finfo(float).tiny)

    def err_at(pts, c):
        return func(pts) - C.chebval(_to_unit(pts, lo, hi), c)

    # initial reference: Chebyshev extrema of the interval mapped to the grid
    target = -np.cos(np.pi * np.arange(need) / (need - 1))
    ref_idx = np.unique(np.clip(np.searchsorted(s, target), 0, m - 1))
    if ref_idx.size < need:
        ref_idx = np.unique(np.linspace(0, m - 1, need).round().astype(int))
    ref = x[ref_idx]

    best = None
    for it in range(1, max_iter + 1):
        c, h = _solve_reference(func(ref), _to_unit(ref, lo, hi), L)
        err = fx - C.chebval(s, c)
        emax_grid = float(np.max(np.abs(err)))
        if emax_grid <= 1e-13 * scale:
            # f is (numerically) a polynomial of degree <= L
            return _finish(c, lo, hi, emax_grid, ref, err_at(ref, c), it, True)
        ext = _reduce_reference(_alternating_extrema(err), err, need)
        if len(ext) < need:
            # too few sign changes on the grid; keep the old reference
            raise RemezError(f"only {len(ext)} alternations found at iteration {it}",
                             best=_finish(c, lo, hi, emax_grid, ref, err_at(ref, c), it, False))
        new_ref = _polish(func, c, lo, hi, x, np.asarray(ext), err)
        e_new = err_at(new_ref, c)
        emax = max(emax_grid, float(np.max(np.abs(e_new))))
        best = _finish(c, lo, hi, emax, new_ref, e_new, it, False)
        if emax - abs(h) <= tol * emax:
            best.converged = True
            return _refine(func, best, fx, s, x, L, lo, hi, err_at, it)
        ref = new_ref
    raise RemezError(f"Remez exchange did not converge in {max_iter} iterations", best=best)


def _refine(func, best, fx, s, x, L, lo, hi, err_at, it):
    """One more levelled solve on the polished reference; kept only if better."""
    c, _ = _solve_reference(func(best.alternation), _to_unit(best.alternation, lo, hi), L)
    err = fx - C.chebval(s, c)
    ext = _reduce_reference(_alternating_extrema(err), err, L + 2)
    if len(ext) < L + 2:
        return best
    ref = _polish(func, c, lo, hi, x, np.asarray(ext), err)
    e_ref = err_at(ref, c)
    emax = max(float(np.max(np.abs(err))), float(np.max(np.abs(e_ref))))
    if emax >= best.sup_error:
        return best
    return _finish(c, lo, hi, emax, ref, e_ref, it + 1, True)


def _polish(func, c, lo, hi, x, idx, err):
    """Move each grid extremum to the local maximum of |err| between neighbours."""
    out = x[idx].copy()
    m = x.size
    for j, i in enumerate(idx):
        a = x[max(i - 1, 0)]
        b = x[min(i + 1, m - 1)]
        if b <= a:
            continue
        sgn = 1.0 if err[i] >= 0 else -1.0

        def neg(t, sgn=sgn):
            return -sgn * float(func(np.asarray([t]))[0] - C.chebval(_to_unit(t, lo, hi), c))

        res = minimize_scalar(neg, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-15 * max(hi - lo, 1e-300) + 1e-300})
        if -res.fun > sgn * err[i]:
            out[j] = res.x
    # keep ordering strict; polishing inside neighbour brackets can at worst tie
    out = np.maximum.accumulate(out)
    return out


def _finish(c, lo, hi, sup_error, ref, ref_err, it, converged):
    mono = C.Chebyshev(c, domain=[lo, hi]).convert(kind=np.polynomial.Polynomial).coef
    mono = np.pad(mono, (0, len(c) - len(mono)))
    return Polynomial(
        coeffs=mono,
        interval=(lo, hi),
        sup_error=float(sup_error),
        cheb=np.asarray(c, dtype=float),
        alternation=np.asarray(ref, dtype=float),
        alternation_errors=np.asarray(ref_err, dtype=float),
        iterations=it,
        converged=converged,
    )


def max_error(poly: Polynomial, f, grid) -> float:
    func = _as_callable(f)
    g = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(func(g) - poly(g))))


def validation_grid(lo: float, hi: float, size: int = 200_001) -> np.ndarray:
    """Uniform grid merged with a quartic-graded grid toward ``lo``."""
    u = np.linspace(0.0, 1.0, size)
    return np.unique(np.concatenate((lo + (hi - lo) * u, lo + (hi - lo) * u**4)))


@dataclass
class JacksonRow:
    degree: int
    error: float
    normalized: float


def jackson_rate_probe(spec: PhiSpec, degrees: Sequence[int], delta: float = 1.0,
                       factor: float = 5.0):
    """Best-approximation errors E_L on [0, delta] and E_L (L**2/delta)**alpha.

    Returns ``(rows, passed)``; ``passed`` is max/min of the normalized column
    below ``factor``.  Rows with E_L = 0 (phi a polynomial) are reported as-is
    and make the check pass trivially.
    """
    degrees = list(degrees)
    if any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ValueError("degrees must be increasing")
    rows = []
    for L in degrees:
        poly = remez_best_poly(spec, L, (0.0, delta))
        rows.append(JacksonRow(L, poly.sup_error, poly.sup_error * (L * L / delta) ** spec.alpha))
    norm = np.array([r.normalized for r in rows])
    if np.all(norm <= 1e-12):
        return rows, True
    passed = bool(norm.min() > 0 and norm.max() / norm.min() < factor)
    return rows, passed


# -- moduli of smoothness -------------------------------------------------------


def omega1(f: Callable, t: float, grid) -> float:
    """sup |f(x) - f(y)| over grid pairs with |x - y| <= t (grid lower bound)."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.unique(np.asarray(grid, dtype=float))
    fx = np.asarray(f(x), dtype=float)
    best = 0.0
    for d in range(1, x.size):
        gap = x[d:] - x[:-d]
        ok = gap <= t
        if not ok.any():
            break
        best = max(best, float(np.max(np.abs(fx[d:] - fx[:-d])[ok])))
    return best


def omega2(f: Callable, t: float, grid) -> float:
    """sup |f(x) + f(y) - 2 f((x+y)/2)| over grid pairs with |x - y| <= 2t."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.unique(np.asarray(grid, dtype=float))
    fx = np.asarray(f(x), dtype=float)
    best = 0.0
    for d in range(1, x.size):
        gap = x[d:] - x[:-d]
        ok = gap <= 2 * t
        if not ok.any():
            break
        a, b = x[:-d][ok], x[d:][ok]
        v = fx[:-d][ok] + fx[d:][ok] - 2.0 * np.asarray(f(0.5 * (a + b)), dtype=float)
        best = max(best, float(np.max(np.abs(v))))
    return best


# -- cache ----------------------------------------------------------------------


def cache_key(spec_id: str, degree: int, interval) -> str:
    raw = json.dumps([spec_id, int(degree), [repr(float(v)) for v in interval]])
    return hashlib.sha256(raw.encode()).hexdigest()[:32]


def cached_best_poly(spec: PhiSpec, degree: int, interval, cache_dir=None) -> Polynomial:
    """remez_best_poly with an optional on-disk JSON cache.

    The cache directory comes from ``cache_dir`` or $ADDFUNC_CACHE_DIR; without
    either the call is uncached.
    """
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if not cache_dir:
        return remez_best_poly(spec, degree, interval)
    path = Path(cache_dir) / f"{cache_key(spec.name, degree, interval)}.json"
    if path.exists():
        return Polynomial.from_record(json.loads(path.read_text()))
    poly = remez_best_poly(spec, degree, interval)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", dir=path.parent, delete=False, suffix=".tmp") as fh:
        json.dump(poly.to_record(), fh)
    os.replace(fh.name, path)
    return poly
