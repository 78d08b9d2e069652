import json

import numpy as np
import pytest

from addfunc.approx import Polynomial, cached_best_poly
from addfunc.cli import main
from addfunc.estimators import poly_estimator_values
from addfunc.phi import power


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_estimate_point_mass_entropy(tmp_path, capsys):
    data = tmp_path / "h.csv"
    data.write_text("symbol_index,count\n1,7\n2,0\n3,0\n")
    code, out, _ = run(capsys, "estimate", str(data), "--mode", "plugin",
                       "--phi", '{"kind": "neg_p_log_p"}')
    assert code == 0
    assert json.loads(out)["value"] == 0.0


def test_estimate_hybrid_happy_path(tmp_path, capsys):
    rng = np.random.default_rng(0)
    data = tmp_path / "s.txt"
    data.write_text("\n".join(map(str, rng.integers(1, 501, size=3000))) + "\n")
    code, out, _ = run(capsys, "estimate", str(data), "--k", "500")
    assert code == 0
    rec = json.loads(out)
    assert rec["diagnostics"]["mode"] == "hybrid4"
    assert {"delta_count", "L"} <= set(rec["diagnostics"])
    assert rec["config"]["phi"] == {"kind": "power", "alpha": 1.2}


def test_estimate_malformed_csv(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text("1,3\n2,oops\n")
    code, _, err = run(capsys, "estimate", str(data))
    assert code == 2
    assert "line 2" in err


def test_estimate_regime_guard_exit_code(tmp_path, capsys):
    data = tmp_path / "h.csv"
    data.write_text("1,5\n2,5\n")
    code, _, err = run(capsys, "estimate", str(data), "--phi", '{"kind":"power","alpha":1.7}')
    assert code == 3


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n_grid": [10], "colour": "blue"}')
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 3 and "colour" in err


def test_simulate_empty_grid(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n_grid": []}')
    assert run(capsys, "simulate", "--config", str(cfg))[0] == 3


def test_simulate_all_cells_fail(tmp_path, capsys, monkeypatch):
    import addfunc.risk

    class Broken:
        def __init__(self, *a, **k):
            raise ArithmeticError("boom")

    monkeypatch.setattr(addfunc.risk, "Estimator", Broken)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_grid": [100, 200], "k_grid": [5], "trials": 2}))
    code, _, err = run(capsys, "simulate", "--config", str(cfg), "--jobs", "1")
    assert code == 4 and "boom" in err


def test_simulate_deterministic_files(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"phi": {"kind": "power", "alpha": 1.2},
                               "modes": ["hybrid4", "plugin"], "n_grid": [500, 1000],
                               "k_grid": [50, 100], "trials": 10, "seed": 17}))
    for name, jobs in (("a", "1"), ("b", "2")):
        assert run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / name),
                   "--jobs", jobs)[0] == 0
    a = (tmp_path / "a" / "risk.csv").read_bytes()
    assert a == (tmp_path / "b" / "risk.csv").read_bytes()
    assert a.startswith(b"# config: ")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["config"]["seed"] == 17


def test_approx_square(capsys):
    code, out, _ = run(capsys, "approx", "--phi", '{"kind":"polynomial","coeffs":[0,0,1]}',
                       "--degree", "1")
    assert code == 0
    rec = json.loads(out)
    np.testing.assert_allclose(rec["polynomial"]["coeffs"], [-0.125, 1.0], atol=1e-6)
    assert rec["polynomial"]["sup_error"] == pytest.approx(0.125, abs=1e-6)
    assert rec["certificate_ok"]


@pytest.mark.parametrize("degree,expected", [(3, 0.0), (0, 0.5)])
def test_approx_linear(capsys, degree, expected):
    code, out, _ = run(capsys, "approx", "--phi", '{"kind":"polynomial","coeffs":[0,1]}',
                       "--degree", str(degree))
    assert code == 0
    assert json.loads(out)["polynomial"]["sup_error"] == pytest.approx(expected, abs=1e-9)


def test_approx_output_roundtrips_into_estimates(tmp_path, capsys):
    code, out, _ = run(capsys, "approx", "--degree", "5", "--interval", "0", "0.01",
                       "--out", str(tmp_path))
    assert code == 0
    rec = json.loads((tmp_path / "approx.json").read_text())["polynomial"]
    back = Polynomial.from_record(rec)
    fresh = cached_best_poly(power(1.2), 5, (0.0, 0.01))
    N = np.arange(0, 60)
    np.testing.assert_array_equal(poly_estimator_values(back, N, 2000),
                                  poly_estimator_values(fresh, N, 2000))


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert "FAIL" not in out
