"""Function families phi with exact derivatives and divergence-speed metadata.

A :class:`PhiSpec` bundles a function on [0, 1], a derivative evaluator up to
``max_order`` and the constants ``(alpha, W_l, c_l, c'_l)`` of the sandwich

    W_l p**(alpha - l) - c'_l <= |phi^(l)(p)| <= W_l p**(alpha - l) + c_l.

The constants are declared, never inferred; :func:`verify_divergence_speed`
checks them on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

MAX_ORDER = 6


class PhiError(ValueError):
    """Base class for invalid phi evaluations."""


class UnsupportedOrderError(PhiError):
    pass


class PhiDomainError(PhiError):
    pass


def falling_power(a: float, m: int) -> float:
    """a (a-1) ... (a-m+1) for real ``a``."""
    out = 1.0
    for j in range(m):
        out *= a - j
    return out


@dataclass(frozen=True)
class PhiSpec:
    """A function class phi together with its declared divergence speed.

    Attributes
    ----------
    kind : str
        ``"power"``, ``"neg_p_log_p"``, ``"polynomial"`` or ``"custom"``.
    alpha : float
        Divergence-speed exponent.
    W, c_upper, c_lower : mapping order -> float
        Constants W_l, c_l and c'_l of the sandwich bound.
    derivative : callable
        ``derivative(order, p)`` returning phi^(order) on an array ``p``.
    value_at_zero : float
        phi(0).
    finite_orders_at_zero : int
        Largest order whose derivative is finite at p = 0 (-1 for none).
    name : str
        Identifier used as cache key.
    """

    kind: str
    alpha: float
    W: Mapping[int, float]
    c_upper: Mapping[int, float]
    c_lower: Mapping[int, float]
    derivative: Callable[[int, np.ndarray], np.ndarray] = field(repr=False, compare=False)
    value_at_zero: float = 0.0
    max_order: int = MAX_ORDER
    finite_orders_at_zero: int = 0
    name: str = "phi"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_order > MAX_ORDER:
            raise UnsupportedOrderError(f"max_order {self.max_order} exceeds {MAX_ORDER}")
        if not math.isfinite(self.value_at_zero):
            raise PhiDomainError("phi(0) must be finite")

    def __call__(self, p):
        return eval_phi(self, 0, p)

    def finite_at_zero(self, order: int) -> bool:
        return order <= self.finite_orders_at_zero


@dataclass(frozen=True)
class ProbabilityVector:
    """Probability vector P = (p_1, ..., p_k)."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("probability vector must be a non-empty 1-d array")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(math.fsum(arr) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(arr)!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @property
    def k(self) -> int:
        return self.p.size

    def __len__(self):
        return self.p.size


def as_prob(P) -> ProbabilityVector:
    return P if isinstance(P, ProbabilityVector) else ProbabilityVector(np.asarray(P, dtype=float))


# -- built-in families -------------------------------------------------------


def power(alpha: float) -> PhiSpec:
    """phi(p) = p**alpha for alpha > 0, with exact derivatives.

    |phi^(l)| = |alpha (alpha-1) ... (alpha-l+1)| p**(alpha-l), so W_l is that
    falling factorial and c_l = c'_l = 0.
    """
    if alpha <= 0:
        raise ValueError("power family needs alpha > 0")
    alpha = float(alpha)
    integer = alpha.is_integer()

    def derivative(order, p):
        coef = falling_power(alpha, order)
        if coef == 0.0:
            return np.zeros_like(p)
        with np.errstate(divide="ignore"):
            return coef * np.power(p, alpha - order)

    # derivative l is finite at 0 iff l <= alpha, or alpha is an integer
    finite = MAX_ORDER if integer else int(math.floor(alpha))
    W = {l: abs(falling_power(alpha, l)) for l in range(1, MAX_ORDER + 1)}
    zeros = {l: 0.0 for l in range(1, MAX_ORDER + 1)}
    return PhiSpec(
        kind="power",
        alpha=alpha,
        W=W,
        c_upper=zeros,
        c_lower=dict(zeros),
        derivative=derivative,
        value_at_zero=0.0,
        finite_orders_at_zero=finite,
        name=f"power(alpha={alpha!r})",
        params={"alpha": alpha},
    )


# Order-1 constants for -p ln p: |ln p + 1| lies in [0, 1 + 26] for p >= 1e-12,
# so W_1 = 1, c'_1 = 1, c_1 = 26 hold on [1e-12, 1).
NEG_P_LOG_P_ORDER1 = (1.0, 26.0, 1.0)
NEG_P_LOG_P_MIN_P = 1e-12


def neg_p_log_p() -> PhiSpec:
    """Shannon entropy summand phi(p) = -p ln p with phi(0) = 0.

    For l >= 2, phi^(l)(p) = (-1)**(l+1) (l-2)! p**(1-l), which is an exact
    divergence speed p**1 with W_l = (l-2)!.  The first derivative grows like
    |ln p| and has no finite sandwich on all of (0, 1); the declared order-1
    constants are valid for p >= 1e-12.
    """

    def derivative(order, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            if order == 0:
                return np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
            if order == 1:
                return -np.log(p) - 1.0
            sign = (-1.0) ** (order + 1)
            return sign * math.factorial(order - 2) * np.power(p, 1.0 - order)

    W = {1: NEG_P_LOG_P_ORDER1[0]}
    cu = {1: NEG_P_LOG_P_ORDER1[1]}
    cl = {1: NEG_P_LOG_P_ORDER1[2]}
    for l in range(2, MAX_ORDER + 1):
        W[l] = float(math.factorial(l - 2))
        cu[l] = 0.0
        cl[l] = 0.0
    return PhiSpec(
        kind="neg_p_log_p",
        alpha=1.0,
        W=W,
        c_upper=cu,
        c_lower=cl,
        derivative=derivative,
        value_at_zero=0.0,
        finite_orders_at_zero=0,
        name="neg_p_log_p",
    )


def polynomial(coeffs: Sequence[float], alpha: float | None = None) -> PhiSpec:
    """phi(p) = sum_m coeffs[m] p**m.

    All derivatives are bounded, so by default the declared speed is
    alpha = 6 with W_l = 1, c_l = sup |phi^(l)| on [0, 1] and c'_l = 1, which
    satisfies the sandwich at every order.  Mostly useful for tests.
    """
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    derivs = [poly.deriv(l) if l else poly for l in range(MAX_ORDER + 1)]

    def derivative(order, p):
        return derivs[order](p)

    grid = np.linspace(0.0, 1.0, 2001)
    sup = {l: float(np.max(np.abs(derivs[l](grid)))) for l in range(1, MAX_ORDER + 1)}
    a = float(MAX_ORDER if alpha is None else alpha)
    return PhiSpec(
        kind="polynomial",
        alpha=a,
        W={l: 1.0 for l in range(1, MAX_ORDER + 1)},
        c_upper=sup,
        c_lower={l: 1.0 for l in range(1, MAX_ORDER + 1)},
        derivative=derivative,
        value_at_zero=float(poly(0.0)),
        finite_orders_at_zero=MAX_ORDER,
        name=f"polynomial({','.join(repr(float(c)) for c in coeffs)})",
        params={f"a{m}": float(c) for m, c in enumerate(coeffs)},
    )


def custom(
    derivative: Callable[[int, np.ndarray], np.ndarray],
    alpha: float,
    W: Mapping[int, float],
    c_upper: Mapping[int, float],
    c_lower: Mapping[int, float],
    *,
    max_order: int = MAX_ORDER,
    finite_orders_at_zero: int = 0,
    value_at_zero: float | None = None,
    name: str = "custom",
) -> PhiSpec:
    """Wrap a user-supplied derivative evaluator with declared constants."""
    if value_at_zero is None:
        value_at_zero = float(derivative(0, np.asarray(0.0)))
    return PhiSpec(
        kind="custom",
        alpha=float(alpha),
        W=dict(W),
        c_upper=dict(c_upper),
        c_lower=dict(c_lower),
        derivative=derivative,
        value_at_zero=value_at_zero,
        max_order=max_order,
        finite_orders_at_zero=finite_orders_at_zero,
        name=name,
    )


BUILTIN_KINDS = ("power", "neg_p_log_p", "polynomial")


def from_config(stanza: Mapping) -> PhiSpec:
    """Build a PhiSpec from ``{"kind": ..., <params>}``; only built-in kinds."""
    stanza = dict(stanza)
    kind = stanza.pop("kind", None)
    if kind == "power":
        alpha = stanza.pop("alpha")
        spec = power(alpha)
    elif kind == "neg_p_log_p":
        spec = neg_p_log_p()
    elif kind == "polynomial":
        spec = polynomial(stanza.pop("coeffs"))
    else:
        raise ValueError(f"unknown phi kind {kind!r}; expected one of {BUILTIN_KINDS}")
    if stanza:
        raise ValueError(f"unknown phi parameters: {sorted(stanza)}")
    return spec


# -- operations -----------------------------------------------------------------


def eval_phi(spec: PhiSpec, order: int, p):
    """phi^(order)(p); scalar in, scalar out, array in, array out."""
    if order < 0 or order > spec.max_order:
        raise UnsupportedOrderError(f"order {order} not supported (max {spec.max_order})")
    scalar = np.ndim(p) == 0
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0):
        raise PhiDomainError("phi is defined for p >= 0")
    at_zero = arr == 0
    if order >= 1 and np.any(at_zero) and not spec.finite_at_zero(order):
        raise PhiDomainError(f"derivative of order {order} diverges at p = 0")
    out = np.asarray(spec.derivative(order, arr), dtype=float)
    if order == 0 and np.any(at_zero):
        out = np.where(at_zero, spec.value_at_zero, out)
    return float(out) if scalar else out


def theta_true(spec: PhiSpec, P) -> float:
    """Additive functional sum_i phi(p_i)."""
    P = as_prob(P)
    return math.fsum(eval_phi(spec, 0, P.p))


def verify_divergence_speed(spec: PhiSpec, order: int, grid, rtol: float = 1e-9):
    """Grid points where the declared sandwich bound fails.

    Returns a list of ``(p, |phi^(l)(p)|, lower, upper)`` tuples; an empty list
    means the declared constants hold on ``grid``.
    """
    if order < 1 or order > spec.max_order:
        raise UnsupportedOrderError(f"order {order} outside 1..{spec.max_order}")
    grid = np.asarray(grid, dtype=float)
    if np.any((grid <= 0) | (grid >= 1)):
        raise PhiDomainError("grid must lie in (0, 1)")
    val = np.abs(eval_phi(spec, order, grid))
    core = spec.W[order] * grid ** (spec.alpha - order)
    lower = core - spec.c_lower[order]
    upper = core + spec.c_upper[order]
    slack = rtol * np.maximum(np.abs(core), 1.0)
    bad = (val < lower - slack) | (val > upper + slack)
    return [
        (float(p), float(v), float(lo), float(hi))
        for p, v, lo, hi in zip(grid[bad], val[bad], lower[bad], upper[bad])
    ]


def holder_constant_probe(spec: PhiSpec, exponent: float, grid, order: int = 1) -> float:
    """Grid estimate of the Hölder seminorm of phi^(order).

    max over grid pairs of |f(x) - f(y)| / |x - y|**exponent with
    f = phi^(order).  Use ``order=0, exponent=1`` for the Lipschitz constant of
    phi and ``order=1, exponent=alpha-1`` for phi'.  The value is a lower bound
    on the true seminorm; it grows under refinement toward 0 when the seminorm
    is infinite.
    """
    if not 0 < exponent <= 1:
        raise ValueError("exponent must lie in (0, 1]")
    x = np.unique(np.asarray(grid, dtype=float))
    f = eval_phi(spec, order, x)
    best = 0.0
    block = 512
    for start in range(0, x.size, block):
        xs = x[start:start + block, None]
        fs = f[start:start + block, None]
        dx = np.abs(xs - x[None, :])
        df = np.abs(fs - f[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dx > 0, df / dx**exponent, 0.0)
        best = max(best, float(np.max(r)))
    return best


def canonicalize(spec: PhiSpec, k: int) -> PhiSpec:
    """Return phi_c(p) = phi(p) - phi'(0) (p - 1/k), which has phi_c'(0) = 0.

    theta(P; phi_c) = theta(P; phi) for every P on k symbols.  When phi'(0)
    diverges, or is already 0, ``spec`` is returned unchanged.
    """
    if not spec.finite_at_zero(1):
        return spec
    c = float(eval_phi(spec, 1, 0.0))
    if c == 0.0:
        return spec
    base = spec.derivative

    def derivative(order, p):
        if order == 0:
            return base(0, p) - c * (p - 1.0 / k)
        if order == 1:
            return base(1, p) - c
        return base(order, p)

    cu = dict(spec.c_upper)
    cl = dict(spec.c_lower)
    cu[1] = cu.get(1, 0.0) + abs(c)
    cl[1] = cl.get(1, 0.0) + abs(c)
    return PhiSpec(
        kind="custom",
        alpha=spec.alpha,
        W=dict(spec.W),
        c_upper=cu,
        c_lower=cl,
        derivative=derivative,
        value_at_zero=spec.value_at_zero + c / k,
        max_order=spec.max_order,
        finite_orders_at_zero=spec.finite_orders_at_zero,
        name=f"{spec.name}|canonical(k={k})",
        params=dict(spec.params),
    )
