import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from addfunc.phi import eval_phi, polynomial, power
from addfunc.smoothing import (SmoothedPhi, bernstein_basis, hermite_bound_probe,
                               hermite_interp, knot_jumps, smoothed_eval)


def test_bernstein_examples():
    assert bernstein_basis(0, 5, 0.0) == 1.0
    assert bernstein_basis(1, 2, 0.5) == 0.5
    assert math.fsum(bernstein_basis(v, 7, 0.3) for v in range(8)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(IndexError):
        bernstein_basis(6, 5, 0.2)


def hermite_by_definition(spec, L, a, b, p):
    """H_L from the defining Bernstein sum (order 0 only)."""
    t = (p - a) / (b - a)
    total = eval_phi(spec, 0, a)
    for m in range(1, L + 1):
        inner = sum((L + 1) / (L + l + 1) * bernstein_basis(l, L + l + 1, t)
                    for l in range(L - m + 1))
        total += eval_phi(spec, m, a) / math.factorial(m) * (b - a) ** m * t**m * inner
    return total


@pytest.mark.parametrize("L", [4, 6])
@pytest.mark.parametrize("ab", [(0.02, 0.01), (1.0, 2.0), (0.3, 0.1)])
def test_hermite_matches_defining_sum(L, ab):
    spec = power(1.2)
    a, b = ab
    for p in np.linspace(min(a, b), max(a, b), 17):
        ref = hermite_by_definition(spec, L, a, b, p)
        assert hermite_interp(spec, L, a, b, 0, p) == pytest.approx(ref, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("L", [4, 6])
def test_hermite_end_conditions(L):
    spec = power(1.2)
    a, b = 0.02, 0.01
    for i in range(L + 1):
        target = eval_phi(spec, i, a)
        assert hermite_interp(spec, L, a, b, i, a) == pytest.approx(target, rel=1e-8)
        if i:
            assert abs(hermite_interp(spec, L, a, b, i, b)) <= 1e-8 * abs(target)
    assert hermite_interp(spec, L, a, b, 0, b) == pytest.approx(eval_phi(spec, 0, a), rel=1e-12)


@pytest.mark.parametrize("order", range(0, 5))
def test_hermite_derivatives_match_finite_differences(order):
    spec = power(1.3)
    p = np.array([0.012, 0.015, 0.018])
    h = 1e-7
    fd = (hermite_interp(spec, 6, 0.02, 0.01, order, p + h)
          - hermite_interp(spec, 6, 0.02, 0.01, order, p - h)) / (2 * h)
    np.testing.assert_allclose(hermite_interp(spec, 6, 0.02, 0.01, order + 1, p), fd, rtol=1e-5)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 1.0))
def test_hermite_is_linear_in_phi(c1, c2, t):
    f1 = polynomial([0.1, 1.0, -2.0, 0.5])
    f2 = polynomial([0.0, 0.3, 0.0, 0.0, 1.0])
    combo = polynomial([c1 * u + c2 * v for u, v in zip([0.1, 1.0, -2.0, 0.5, 0.0],
                                                         [0.0, 0.3, 0.0, 0.0, 1.0])])
    p = 0.1 + 0.1 * t
    lhs = hermite_interp(combo, 6, 0.2, 0.1, 0, p)
    rhs = c1 * hermite_interp(f1, 6, 0.2, 0.1, 0, p) + c2 * hermite_interp(f2, 6, 0.2, 0.1, 0, p)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_hermite_rejects_equal_endpoints():
    with pytest.raises(ValueError):
        hermite_interp(power(1.2), 4, 0.1, 0.1, 0, 0.1)


@pytest.mark.parametrize("L", [4, 6])
@pytest.mark.parametrize("delta", [0.3, 0.02, 2.0**-12])
def test_one_sided_limits_agree_at_all_orders(L, delta):
    jumps = knot_jumps(SmoothedPhi(power(1.2), L, delta))
    assert len(jumps) == 4 * (L + 1)
    assert max(j[-1] for j in jumps) <= 1e-6


@pytest.mark.parametrize("L", [4, 6])
@pytest.mark.parametrize("order", range(0, 4))
def test_smoothed_continuity_at_knots(L, order):
    s = SmoothedPhi(power(1.2), L, 0.02)
    for knot in (0.01, 0.02, 1.0, 2.0):
        lo, hi = s(knot - 1e-9, order), s(knot + 1e-9, order)
        scale = max(abs(lo), abs(hi), abs(eval_phi(power(1.2), order, 0.02)) * 1e-3)
        assert abs(lo - hi) <= 1e-6 * scale


def test_smoothed_pieces():
    spec = power(1.2)
    s = SmoothedPhi(spec, 6, 0.02)
    p = np.linspace(0.02, 1.0, 50)
    np.testing.assert_array_equal(smoothed_eval(s, 0, p), eval_phi(spec, 0, p))
    assert s(3.0, 3) == 0.0
    assert s(0.001) == eval_phi(spec, 0, 0.02)
    assert s(5.0) == 1.0
    for order in range(1, 7):
        assert s(0.005, order) == 0.0


def test_smoothed_linear_has_no_curvature():
    s = SmoothedPhi(polynomial([0.0, 1.0]), 4, 0.05)
    np.testing.assert_array_equal(smoothed_eval(s, 2, np.linspace(0.05, 1, 20)), 0.0)


@pytest.mark.parametrize("ell,beta", [(2, 0), (3, 0), (4, 0), (4, 1)])
def test_hermite_bound_scaling(ell, beta):
    rows, passed = hermite_bound_probe(power(1.2), 6, ell, beta, [2.0**-j for j in range(4, 13)])
    assert passed, rows


def test_hermite_bound_low_order_is_bounded():
    rows, passed = hermite_bound_probe(power(1.2), 6, 1, 0, [2.0**-j for j in range(4, 13)])
    assert passed
    assert max(r[1] for r in rows) < 2.0
