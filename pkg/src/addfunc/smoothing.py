"""Generalized Hermite interpolation and the smoothed functional H_{L,Delta}[phi].

H_L(p; phi, a, b) matches phi and its first L derivatives at ``a`` and is flat
to order L at ``b``.  Writing t = (p - a) / (b - a),

    H_L = phi(a) + sum_{m=1}^{L} phi^(m)(a) / m! (b - a)**m g_m(t),
    g_m(t) = t**m (1 - t)**(L+1) sum_{l=0}^{L-m} C(L+l, l) t**l,

using (L+1)/(L+l+1) * Bernstein_{l, L+l+1}(t) = C(L+l, l) t**l (1-t)**(L+1).
Derivatives in p come from the Leibniz rule on the three factors of g_m, so
the matching conditions at both end points hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .phi import PhiSpec, eval_phi


def bernstein_basis(nu: int, n: int, x):
    """C(n, nu) x**nu (1 - x)**(n - nu)."""
    if not 0 <= nu <= n:
        raise IndexError(f"Bernstein index nu={nu} outside 0..{n}")
    x = np.asarray(x, dtype=float)
    out = math.comb(n, nu) * x**nu * (1.0 - x) ** (n - nu)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _q_derivs(L: int, m: int, kmax: int):
    """Integer coefficient arrays (highest power first) of Q_m and its derivatives."""
    q = np.array([math.comb(L + l, l) for l in range(L - m, -1, -1)], dtype=float)
    out = [q]
    for _ in range(kmax):
        out.append(np.polyder(out[-1]) if out[-1].size > 1 else np.zeros(1))
    return tuple(out)


def _g_deriv(L: int, m: int, r: int, t: np.ndarray) -> np.ndarray:
    """d^r/dt^r of t**m (1 - t)**(L+1) Q_m(t)."""
    qd = _q_derivs(L, m, r)
    total = np.zeros_like(t)
    one_minus = 1.0 - t
    for i in range(min(r, m) + 1):
        d1 = math.perm(m, i) * t ** (m - i)
        for j in range(min(r - i, L + 1) + 1):
            k = r - i - j
            d2 = (-1) ** j * math.perm(L + 1, j) * one_minus ** (L + 1 - j)
            coef = math.factorial(r) // (math.factorial(i) * math.factorial(j) * math.factorial(k))
            total = total + coef * d1 * d2 * np.polyval(qd[k], t)
    return total


def hermite_interp(spec: PhiSpec, L: int, a: float, b: float, order: int, p):
    """Evaluate the order-th p-derivative of H_L(p; phi, a, b)."""
    if a == b:
        raise ValueError("Hermite interpolation needs a != b")
    if L > spec.max_order:
        raise ValueError(f"phi supports derivatives up to {spec.max_order}, need {L}")
    if not 0 <= order <= L:
        raise ValueError(f"order must lie in 0..{L}")
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    h = b - a
    t = (p - a) / h
    out = np.zeros_like(t)
    if order == 0:
        out = out + eval_phi(spec, 0, a)
    for m in range(1, L + 1):
        dm = eval_phi(spec, m, a)
        if dm == 0.0:
            continue
        out = out + dm / math.factorial(m) * h ** (m - order) * _g_deriv(L, m, order, t)
    return float(out) if scalar else out


@dataclass(frozen=True)
class SmoothedPhi:
    """phi with its small-p and p > 1 tails replaced by Hermite blends.

    Pieces: constant phi(Delta) for p <= Delta/2, H_L(p; phi, Delta, Delta/2) on
    (Delta/2, Delta), phi itself on [Delta, 1], H_L(p; phi, 1, 2) on (1, 2) and
    constant phi(1) for p >= 2.
    """

    base: PhiSpec
    L: int
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.L > self.base.max_order:
            raise ValueError(f"phi supports derivatives up to {self.base.max_order}, need {self.L}")

    def __call__(self, p, order: int = 0):
        return smoothed_eval(self, order, p)


def smoothed_eval(s: SmoothedPhi, order: int, p):
    """Order-th derivative of H_{L,Delta}[phi] at ``p >= 0``."""
    if not 0 <= order <= s.L:
        raise ValueError(f"order must lie in 0..{s.L}")
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    d = s.delta
    out = np.zeros_like(p)
    low = p <= d / 2
    left = (p > d / 2) & (p < d)
    mid = (p >= d) & (p <= 1.0)
    right = (p > 1.0) & (p < 2.0)
    high = p >= 2.0
    if order == 0:
        if low.any():
            out[low] = eval_phi(s.base, 0, d)
        if high.any():
            out[high] = eval_phi(s.base, 0, 1.0)
    if left.any():
        out[left] = hermite_interp(s.base, s.L, d, d / 2, order, p[left])
    if mid.any():
        out[mid] = eval_phi(s.base, order, p[mid])
    if right.any():
        out[right] = hermite_interp(s.base, s.L, 1.0, 2.0, order, p[right])
    return float(out) if scalar else out


PIECES = ("low", "left", "mid", "right", "high")


def piece_eval(s: SmoothedPhi, piece: str, order: int, p):
    """Closed form of one piece, evaluated at ``p`` regardless of its domain."""
    p = np.asarray(p, dtype=float)
    d = s.delta
    if piece in ("low", "high"):
        if order:
            return np.zeros_like(p)
        return np.full_like(p, eval_phi(s.base, 0, d if piece == "low" else 1.0))
    if piece == "left":
        return hermite_interp(s.base, s.L, d, d / 2, order, p)
    if piece == "mid":
        return eval_phi(s.base, order, p)
    if piece == "right":
        return hermite_interp(s.base, s.L, 1.0, 2.0, order, p)
    raise ValueError(f"unknown piece {piece!r}")


def knot_jumps(s: SmoothedPhi, orders=None):
    """Relative jumps between one-sided limits at the knots Delta/2, Delta, 1, 2.

    Each piece is polynomial or smooth up to its end point, so the one-sided
    limit equals the piece's closed form at the knot.  Returns a list of
    ``(knot, order, left, right, relative_jump)``; the scale is the larger of
    the two sides and |phi^(order)| at the matching anchor (Delta or 1).
    """
    d = s.delta
    knots = ((d / 2, "low", "left", d), (d, "left", "mid", d),
             (1.0, "mid", "right", 1.0), (2.0, "right", "high", 1.0))
    out = []
    for knot, a, b, anchor in knots:
        for order in range(s.L + 1) if orders is None else orders:
            lo = float(piece_eval(s, a, order, knot))
            hi = float(piece_eval(s, b, order, knot))
            scale = max(abs(lo), abs(hi), abs(eval_phi(s.base, order, anchor)))
            out.append((knot, order, lo, hi, abs(lo - hi) / scale if scale else 0.0))
    return out


def probe_grid(delta: float, size: int = 4000) -> np.ndarray:
    """Grid over (0, 2.5] dense on the Hermite pieces and log-spaced elsewhere."""
    return np.unique(np.concatenate((
        np.geomspace(delta / 8, 2.5, size),
        np.linspace(delta / 2, delta, size // 4),
        np.linspace(1.0, 2.0, size // 4),
    )))


def hermite_bound_probe(base: PhiSpec, L: int, ell: int, beta: float, deltas,
                        factor: float = 10.0):
    """Scaling of sup_p p**beta |H^(ell)_{L,Delta}[phi](p)| over a sweep of Delta.

    When ell > alpha + beta the sup is divided by Delta**(alpha + beta - ell);
    otherwise it is reported raw (it should stay bounded).  Returns
    ``(rows, passed)`` with rows ``(delta, sup, normalized)`` and ``passed``
    true when max/min of the normalized column is below ``factor``.  A column
    that is identically zero passes.
    """
    scaling = ell > base.alpha + beta
    rows = []
    for d in deltas:
        s = SmoothedPhi(base, L, float(d))
        g = probe_grid(d)
        sup = float(np.max(g**beta * np.abs(smoothed_eval(s, ell, g))))
        norm = sup / d ** (base.alpha + beta - ell) if scaling else sup
        rows.append((float(d), sup, norm))
    col = np.array([r[2] for r in rows])
    if np.all(col == 0):
        return rows, True
    passed = bool(col.min() > 0 and col.max() / col.min() < factor)
    return rows, passed
