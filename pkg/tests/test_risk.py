import math

import numpy as np
import pytest

from addfunc.estimators import EstimatorConfig
from addfunc.phi import polynomial, power
from addfunc.risk import (OracleError, exact_bias_oracle, lecam_two_point, monte_carlo_risk,
                          rate_fit, report_rate_fit, run_grid, summarize, two_point_kl)
from addfunc.sampling import distribution_zoo


def test_oracle_examples():
    assert exact_bias_oracle(lambda j: j, 3.7) == pytest.approx(3.7, abs=1e-10)
    assert exact_bias_oracle(lambda j: j * (j - 1), 2.0) == pytest.approx(4.0, abs=1e-10)
    assert exact_bias_oracle(lambda j: np.full(j.shape, 2.5), 8.0) == pytest.approx(2.5, abs=1e-14)


def test_oracle_reports_overflow():
    with pytest.raises(OracleError):
        exact_bias_oracle(lambda j: np.exp(1000.0 * j), 5.0)


def test_summarize_decomposition():
    rng = np.random.default_rng(0)
    v = rng.normal(1.0, 0.3, size=500)
    s = summarize(v, 0.8)
    assert s["mse"] == pytest.approx(s["bias"] ** 2 + s["var"], rel=1e-6)


def test_monte_carlo_linear_phi():
    P = distribution_zoo("zipf", 30)
    cell = monte_carlo_risk(polynomial([0.0, 1.0]), P,
                            EstimatorConfig(mode="hybrid4", n=300, k=30, force=True), 400, 5)
    assert abs(cell.bias) <= 4 * cell.stderr
    assert cell.mse == pytest.approx(cell.var + cell.bias**2, rel=1e-6)


def test_monte_carlo_deterministic():
    P = distribution_zoo("uniform", 10)
    cfg = EstimatorConfig(mode="plugin", n=100, k=10)
    a = monte_carlo_risk(power(1.5), P, cfg, 2, 7)
    b = monte_carlo_risk(power(1.5), P, cfg, 2, 7)
    assert a == b


def test_point_mass_multinomial_plugin():
    P = np.zeros(5)
    P[0] = 1.0
    cell = monte_carlo_risk(power(2.0), P, EstimatorConfig(mode="plugin", n=50, k=5), 20, 1,
                            sampling="multinomial")
    assert cell.bias == 0.0 and cell.var == 0.0


def test_monte_carlo_records_failures():
    cell = monte_carlo_risk(power(1.7), distribution_zoo("uniform", 5),
                            EstimatorConfig(mode="hybrid4", n=50, k=5), 3, 1)
    assert cell.failed and "ConfigError" in cell.error


def test_rate_fit_exact_laws():
    n = np.array([1e3, 1e4, 1e5, 1e6])
    fit = rate_fit(n, 5 / n)
    assert fit["slope"] == pytest.approx(-1.0, abs=0.01)
    k = 100
    fit = rate_fit(n, k**2 / (n * np.log(n)) ** 2.4, covariate="nlogn")
    assert fit["slope"] == pytest.approx(-2.4, abs=0.02)
    lo, hi = fit["band"]
    assert lo <= fit["slope"] <= hi


def test_rate_fit_drops_nonpositive():
    with pytest.warns(UserWarning):
        fit = rate_fit([1, 10, 100, 1000], [1.0, 0.1, 0.0, 0.001])
    assert fit["slope"] == pytest.approx(-1.0)


def test_lecam_examples():
    assert lecam_two_point(power(2.0), 100, 3, 0.4, 0.4)["bound"] == 0.0
    r = lecam_two_point(power(2.0), 100, 3, 0.5, 0.6)
    assert r["delta_theta"] == pytest.approx(0.035, abs=1e-12)
    kl = 0.5 * math.log(0.5 / 0.4) + 0.5 * math.log(0.5 / 0.6)
    assert r["kl"] == pytest.approx(kl, rel=1e-12)
    assert r["kl"] <= r["chi2_half"]
    assert r["chi2_half"] == pytest.approx(0.02, abs=1e-3)
    assert r["bound"] == pytest.approx(0.035**2 / 4 * math.exp(-100 * kl), rel=1e-12)


def test_two_point_kl_matches_generic_sum():
    from addfunc.risk import two_point
    k, p, q = 7, 0.3, 0.35
    P, Q = two_point(k, p).p, two_point(k, q).p
    assert two_point_kl(p, q) == pytest.approx(float(np.sum(P * np.log(P / Q))), rel=1e-12)


def test_report_csv_and_jobs_independence():
    base = EstimatorConfig(mode="plugin")
    args = (power(1.6), base, [100, 200, 400, 800], [10], ["uniform"], 5, 3)
    a = run_grid(*args, jobs=1)
    b = run_grid(*args, jobs=2)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "n,k,dist,mode,trials,bias,var,mse,stderr,seed"
    fits = report_rate_fit(a)
    assert "uniform,k=10" in fits
    assert "# k=10,dist=uniform" in a.plot_data()
