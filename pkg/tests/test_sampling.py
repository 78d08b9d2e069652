import math

import numpy as np
import pytest
from scipy import stats

from addfunc.sampling import (Histogram, ParseError, distribution_zoo, make_rng,
                              poissonize_and_split, read_histogram_csv, read_samples,
                              sample_multinomial, sample_poisson, write_histogram_csv)


def test_multinomial_edge_cases():
    assert sample_multinomial([0.5, 0.5], 0, seed=1).counts.tolist() == [0, 0]
    assert sample_multinomial([1.0, 0.0, 0.0], 7, seed=1).counts.tolist() == [7, 0, 0]


def test_multinomial_normal_band():
    n, p = 10**6, 0.25
    band = 4 * math.sqrt(n * p * (1 - p))
    P = distribution_zoo("uniform", 4)
    inside = sum(np.all(np.abs(sample_multinomial(P, n, make_rng(1, t)).counts - n / 4) <= band)
                 for t in range(1000))
    assert inside >= 999


def test_split_zero_mass_symbol():
    s = poissonize_and_split([0.5, 0.5, 0.0], 1000, seed=3)
    assert s.primary.counts[2] == 0 and s.selector.counts[2] == 0


@pytest.mark.parametrize("thinning", [False, True])
def test_split_poisson_moments(thinning):
    n = 10**5
    x = np.array([poissonize_and_split([0.5, 0.5], n, make_rng(4, t), thinning).primary.counts[0]
                  for t in range(1000)])
    lam = n / 2
    assert abs(x.mean() - lam) <= 3 * math.sqrt(lam / x.size)
    assert abs(x.var(ddof=1) / lam - 1) < 0.1


def test_split_halves_independent():
    pairs = np.array([[s.primary.counts[0], s.selector.counts[0]]
                      for s in (poissonize_and_split([0.3, 0.7], 50, make_rng(5, t))
                                for t in range(10**4))])
    assert abs(np.corrcoef(pairs.T)[0, 1]) < 0.05


def test_determinism():
    P = distribution_zoo("zipf", 30)
    a = poissonize_and_split(P, 500, seed=11)
    b = poissonize_and_split(P, 500, seed=11)
    assert np.array_equal(a.primary.counts, b.primary.counts)
    assert np.array_equal(a.selector.counts, b.selector.counts)
    assert np.array_equal(sample_poisson(P, 500, make_rng(2, 3)).counts,
                          sample_poisson(P, 500, make_rng(2, 3)).counts)
    assert not np.array_equal(sample_poisson(P, 500, make_rng(2, 3)).counts,
                              sample_poisson(P, 500, make_rng(2, 4)).counts)


def test_factorial_moment_identity():
    for lam in (0.5, 3.0, 17.0, 50.0):
        for m in range(0, 21):
            # (j)_m shifts the mass by m, so the support must reach m + the Poisson tail
            hi = int(stats.poisson.isf(1e-16, lam)) + m + 5
            j = np.arange(hi + 1)
            w = np.exp(stats.poisson.logpmf(j, lam))
            val = math.fsum(w[i] * math.perm(int(i), m) for i in j)
            assert val == pytest.approx(lam**m, rel=1e-9)


def test_zoo_presets():
    np.testing.assert_allclose(distribution_zoo("uniform", 5).p, 0.2)
    np.testing.assert_allclose(distribution_zoo("two_point", 3, p=0.5).p, [0.5, 0.25, 0.25])
    np.testing.assert_allclose(distribution_zoo("zipf", 3).p, [6 / 11, 3 / 11, 2 / 11])
    assert distribution_zoo("half_uniform", 10).p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        distribution_zoo("cauchy", 4)
    with pytest.raises(ValueError):
        distribution_zoo("uniform", 1)


def test_histogram_invariants():
    with pytest.raises(ValueError):
        Histogram(np.array([1, 2]), 5)
    with pytest.raises(ValueError):
        Histogram(np.array([-1, 2]), 1)
    h = Histogram(np.array([1, 2]), 7, "poissonized")
    assert h.k == 2


def test_csv_roundtrip(tmp_path):
    h = Histogram.from_counts([3, 0, 5, 1])
    path = tmp_path / "h.csv"
    write_histogram_csv(h, path)
    back = read_histogram_csv(path)
    assert back.counts.tolist() == [3, 0, 5, 1] and back.n == 9


def test_csv_errors_carry_line_numbers():
    with pytest.raises(ParseError) as err:
        read_histogram_csv("symbol_index,count\n1,3\n2,x\n")
    assert err.value.line == 3
    with pytest.raises(ParseError):
        read_histogram_csv("1,3\n1,4\n")
    with pytest.raises(ParseError):
        read_histogram_csv("5,1\n", k=3)


def test_read_samples():
    h = read_samples("1\n3\n3\n\n2\n", k=4)
    assert h.counts.tolist() == [1, 1, 2, 0]
    with pytest.raises(ParseError) as err:
        read_samples("1\n9\n", k=4)
    assert err.value.line == 2
