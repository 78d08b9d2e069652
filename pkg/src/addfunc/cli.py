"""Command-line front end: ``addfunc {estimate,simulate,approx,selftest}``.

Exit codes: 0 success, 2 unparsable data, 3 invalid configuration,
4 estimator or approximation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .approx import RemezError, remez_best_poly
from .estimators import MODES, ConfigError, EstimatorConfig, estimate
from .phi import PhiError, from_config
from .risk import SAMPLING, dumps, run_grid
from .sampling import DISTRIBUTIONS, ParseError, read_histogram_csv, read_samples

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_ESTIMATOR = 0, 2, 3, 4

DEFAULTS = {
    "phi": {"kind": "power", "alpha": 1.2},
    "mode": "hybrid4",
    "C1": 0.6,
    "C2": 1.0,
    "strict_theory": False,
    "force": False,
    "threshold": None,
    "clamp_range": "poly_interval",
    "seed": 0,
    "jobs": None,
    "out": None,
    "format": None,
    # estimate
    "data": None,
    "input_format": "auto",
    "k": None,
    # simulate
    "modes": None,
    "n_grid": [1000, 10000],
    "k_grid": [100],
    "dists": ["uniform"],
    "dist_params": {},
    "trials": 100,
    "sampling": "poisson",
    # approx
    "degree": 4,
    "interval": [0.0, 1.0],
}


ESTIMATOR_KEYS = ("mode", "C1", "C2", "strict_theory", "force", "threshold", "clamp_range")
RELEVANT = {
    "estimate": ("phi", "seed") + ESTIMATOR_KEYS + ("data", "input_format", "k"),
    "simulate": ("phi", "seed") + ESTIMATOR_KEYS + ("modes", "n_grid", "k_grid", "dists",
                                                     "dist_params", "trials", "sampling"),
    "approx": ("phi", "degree", "interval"),
    "selftest": (),
}


class UsageError(Exception):
    """Invalid configuration; maps to exit code 3."""


@dataclass
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def estimator_stanza(self) -> dict:
        return {k: self.values[k] for k in ESTIMATOR_KEYS}

    def effective(self) -> dict:
        """The keys that determine this subcommand's output."""
        return {"subcommand": self.subcommand,
                **{k: self.values[k] for k in RELEVANT[self.subcommand]}}


def load_config(subcommand: str, path, overrides: dict) -> RunConfig:
    values = json.loads(json.dumps(DEFAULTS))
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(subcommand, values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    v = cfg.values
    if not isinstance(v["phi"], dict):
        raise UsageError("phi must be an object such as {\"kind\": \"power\", \"alpha\": 1.2}")
    modes = v["modes"] if v["modes"] is not None else [v["mode"]]
    for m in modes:
        if m not in MODES:
            raise UsageError(f"unknown mode {m!r}; expected one of {MODES}")
    if v["format"] not in (None, "csv", "json"):
        raise UsageError("format must be csv or json")
    if cfg.subcommand == "simulate":
        for key in ("n_grid", "k_grid", "dists"):
            if not isinstance(v[key], list) or not v[key]:
                raise UsageError(f"{key} must be a nonempty list")
        for d in v["dists"]:
            if d not in DISTRIBUTIONS:
                raise UsageError(f"unknown distribution {d!r}; expected one of {DISTRIBUTIONS}")
        if int(v["trials"]) < 2:
            raise UsageError("trials must be >= 2")
        if v["sampling"] not in SAMPLING:
            raise UsageError(f"sampling must be one of {SAMPLING}")
    if cfg.subcommand == "approx":
        if int(v["degree"]) < 0:
            raise UsageError("degree must be >= 0")
        lo, hi = v["interval"]
        if not 0 <= lo < hi:
            raise UsageError("interval must satisfy 0 <= lo < hi")


def phi_from(cfg: RunConfig):
    try:
        return from_config(cfg["phi"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid phi stanza {cfg['phi']!r}: {exc}") from None


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", dir=path.parent, delete=False, suffix=".tmp") as fh:
        fh.write(text)
    os.replace(fh.name, path)


def emit(text: str, out, name: str) -> None:
    if out:
        write_atomic(Path(out) / name, text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# -- subcommands ----------------------------------------------------------------


def read_data(path: str, fmt: str, k):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if fmt == "auto":
        first = next((ln for ln in text.splitlines() if ln.strip()), "")
        fmt = "histogram" if "," in first else "samples"
    if fmt == "histogram":
        return read_histogram_csv(text, k)
    if fmt == "samples":
        if k is None:
            nums = [ln.strip() for ln in text.splitlines() if ln.strip()]
            k = max((int(x) for x in nums if x.lstrip("-").isdigit()), default=1)
        return read_samples(text, int(k))
    raise UsageError(f"unknown input_format {fmt!r}")


def cmd_estimate(cfg: RunConfig) -> int:
    if not cfg["data"]:
        raise UsageError("estimate needs a data file")
    spec = phi_from(cfg)
    hist = read_data(cfg["data"], cfg["input_format"], cfg["k"])
    if hist.n < 1:
        raise UsageError("data contains no samples")
    try:
        ecfg = EstimatorConfig(n=hist.n, k=hist.k, **cfg.estimator_stanza())
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    result = estimate(spec, hist, ecfg, seed=int(cfg["seed"]))
    record = {"config": cfg.effective(), **result.to_record()}
    if cfg["format"] == "csv":
        d = result.diagnostics
        rows = ["key,value", f"value,{result.value!r}"]
        rows += [f"branch_{b},{c}" for b, c in sorted(result.branch_counts.items())]
        rows += [f"delta_count,{d['delta_count']!r}", f"L,{d['L']}"]
        text = f"# config: {json.dumps(cfg.effective(), sort_keys=True)}\n" + "\n".join(rows) + "\n"
        emit(text, cfg["out"], "estimate.csv")
    else:
        emit(dumps(record), cfg["out"], "estimate.json")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    spec = phi_from(cfg)
    modes = cfg["modes"] or [cfg["mode"]]
    jobs = cfg["jobs"] or os.cpu_count() or 1
    header = f"# config: {json.dumps(cfg.effective(), sort_keys=True)}\n"
    csv_parts, summaries, plots = [], [], []
    failed = total = 0
    for i, mode in enumerate(modes):
        stanza = {**cfg.estimator_stanza(), "mode": mode}
        try:
            base = EstimatorConfig(**stanza)
            base.validate(spec)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        report = run_grid(spec, base, [int(n) for n in cfg["n_grid"]],
                          [int(k) for k in cfg["k_grid"]], cfg["dists"], int(cfg["trials"]),
                          int(cfg["seed"]), jobs=int(jobs), sampling=cfg["sampling"],
                          dist_params=cfg["dist_params"])
        report.config = cfg.effective()
        body = report.to_csv()
        csv_parts.append(body if i == 0 else body.split("\n", 1)[1])
        summaries.append(report.summary())
        plots.append(f"# mode={mode}\n{report.plot_data()}")
        failed += sum(c.failed for c in report.cells)
        total += len(report.cells)
        for c in report.cells:
            if c.failed:
                print(f"cell n={c.n} k={c.k} dist={c.dist} mode={mode} failed: {c.error}",
                      file=sys.stderr)
    csv_text = header + "".join(csv_parts)
    summary = {"config": cfg.effective(), "reports": summaries}
    if cfg["out"]:
        write_atomic(Path(cfg["out"]) / "risk.csv", csv_text)
        write_atomic(Path(cfg["out"]) / "summary.json", dumps(summary))
        write_atomic(Path(cfg["out"]) / "plot.dat", "\n".join(plots))
    elif cfg["format"] == "json":
        emit(dumps(summary), None, "")
    else:
        emit(csv_text, None, "")
    return EXIT_ESTIMATOR if failed == total else EXIT_OK


def cmd_approx(cfg: RunConfig) -> int:
    spec = phi_from(cfg)
    degree = int(cfg["degree"])
    interval = tuple(float(v) for v in cfg["interval"])
    try:
        poly = remez_best_poly(spec, degree, interval)
    except RemezError as exc:
        print(f"remez failed: {exc}", file=sys.stderr)
        if exc.best is not None:
            print(dumps(exc.best.to_record()), file=sys.stderr)
        return EXIT_ESTIMATOR
    record = {"config": cfg.effective(), "polynomial": poly.to_record(),
              "certificate_ok": poly.certificate_ok()}
    if cfg["format"] == "csv":
        lines = [f"# config: {json.dumps(cfg.effective(), sort_keys=True)}",
                 f"# sup_error: {poly.sup_error!r}", "m,coeff"]
        lines += [f"{m},{float(c)!r}" for m, c in enumerate(poly.coeffs)]
        lines += ["", "alternation_x,error"]
        lines += [f"{float(x)!r},{float(e)!r}"
                  for x, e in zip(poly.alternation, poly.alternation_errors)]
        emit("\n".join(lines) + "\n", cfg["out"], "approx.csv")
    else:
        emit(dumps(record), cfg["out"], "approx.json")
    return EXIT_OK


def cmd_selftest(cfg: RunConfig) -> int:
    from .selftest import run

    return run(verbose=True)


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "approx": cmd_approx,
            "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--phi", type=json.loads, help='phi stanza as JSON, e.g. \'{"kind": "power", "alpha": 1.2}\'')
    common.add_argument("--mode", choices=MODES)

    p = argparse.ArgumentParser(prog="addfunc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("estimate", parents=[common], help="estimate theta from a data file")
    e.add_argument("data", nargs="?", help="histogram CSV or newline-delimited samples")
    e.add_argument("--k", type=int, help="alphabet size")
    e.add_argument("--input-format", dest="input_format",
                   choices=("auto", "histogram", "samples"))
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo risk sweep")
    s.add_argument("--trials", type=int)
    a = sub.add_parser("approx", parents=[common], help="best polynomial approximation")
    a.add_argument("--degree", type=int)
    a.add_argument("--interval", type=float, nargs=2)
    sub.add_parser("selftest", parents=[common], help="run the built-in invariant checks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.command == "estimate" and args.data is None:
        overrides.pop("data")
    try:
        cfg = load_config(args.command, args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (UsageError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhiError, RemezError, ArithmeticError, ValueError) as exc:
        print(f"estimator error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())
