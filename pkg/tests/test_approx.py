import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from addfunc.approx import (Polynomial, cached_best_poly, jackson_rate_probe, max_error, omega1,
                            omega2, remez_best_poly, validation_grid)
from addfunc.phi import polynomial, power


def test_square_degree_one_classical_answer():
    poly = remez_best_poly(lambda x: x * x, 1, (0.0, 1.0))
    assert poly.sup_error == pytest.approx(0.125, abs=1e-6)
    np.testing.assert_allclose(poly.coeffs, [-0.125, 1.0], atol=1e-6)
    assert poly.certificate_ok()
    np.testing.assert_allclose(poly.alternation, [0.0, 0.5, 1.0], atol=1e-6)


def test_identity_degree_zero():
    poly = remez_best_poly(lambda x: x, 0, (0.0, 1.0))
    assert poly.coeffs[0] == pytest.approx(0.5, abs=1e-9)
    assert poly.sup_error == pytest.approx(0.5, abs=1e-9)


def test_square_grid_search_oracle():
    # brute force over (a, b) for min_{a,b} max |x^2 - a - b x|
    x = np.linspace(0, 1, 401)
    best = min(np.max(np.abs(x * x - a - b * x))
               for a in np.linspace(-0.2, 0.0, 81) for b in np.linspace(0.9, 1.1, 81))
    poly = remez_best_poly(lambda t: t * t, 1)
    assert poly.sup_error <= best + 1e-9
    assert best - poly.sup_error < 2e-3


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=7), st.integers(0, 3))
def test_polynomials_reproduce_themselves(coeffs, extra):
    deg = len(coeffs) - 1 + extra
    poly = remez_best_poly(polynomial(coeffs), deg, (0.0, 1.0))
    x = validation_grid(0.0, 1.0, 2001)
    ref = np.polynomial.polynomial.polyval(x, coeffs)
    assert np.max(np.abs(poly(x) - ref)) < 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_perturbation_does_not_improve_best_error():
    f = power(1.2)
    poly = remez_best_poly(f, 4, (0.0, 1.0))
    grid = validation_grid(0.0, 1.0, 20001)
    base = max_error(poly, f, grid)
    assert base == pytest.approx(poly.sup_error, rel=1e-6)
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = poly.coeffs + rng.normal(scale=1e-4, size=poly.coeffs.size)
        trial = Polynomial(c, poly.interval, 0.0)
        assert max_error(trial, f, grid) >= base * (1 - 1e-9)


def test_certificate_alternates_on_small_interval():
    poly = remez_best_poly(power(1.2), 5, (0.0, 3.7e-3))
    assert poly.certificate_ok()
    grid = validation_grid(0.0, 3.7e-3, 50001)
    assert max_error(poly, power(1.2), grid) == pytest.approx(poly.sup_error, rel=1e-5)


def test_jackson_probe_power_law():
    rows, passed = jackson_rate_probe(power(1.2), [2, 4, 8, 16])
    assert passed
    assert rows[0].error > rows[-1].error


def test_record_roundtrip_reproduces_values():
    poly = remez_best_poly(power(1.5), 6, (0.0, 0.02))
    back = Polynomial.from_record(json.loads(json.dumps(poly.to_record())))
    x = np.linspace(0, 0.02, 101)
    np.testing.assert_array_equal(back(x), poly(x))
    np.testing.assert_array_equal(back.coeffs, poly.coeffs)


def test_cache_hit_is_identical(tmp_path):
    a = cached_best_poly(power(1.2), 5, (0.0, 0.01), cache_dir=tmp_path)
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    b = cached_best_poly(power(1.2), 5, (0.0, 0.01), cache_dir=tmp_path)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    assert a.sup_error == b.sup_error


def test_moduli_of_linear_and_square():
    g = np.linspace(0, 1, 201)
    assert omega1(lambda x: 3 * x, 0.1, g) == pytest.approx(0.3, rel=1e-9)
    assert omega2(lambda x: 3 * x + 1, 0.1, g) == pytest.approx(0.0, abs=1e-12)
    # x^2 + y^2 - 2((x+y)/2)^2 = (x-y)^2/2, maximal at |x-y| = 2t
    assert omega2(lambda x: x * x, 0.1, g) == pytest.approx(0.02, rel=1e-9)
