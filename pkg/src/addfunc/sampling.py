"""Sampling, Poissonization with sample splitting, and histogram I/O."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phi import ProbabilityVector, as_prob

MULTINOMIAL = "multinomial"
POISSONIZED = "poissonized"


class ParseError(ValueError):
    """Malformed histogram or sample file; ``line`` is 1-based."""

    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass(frozen=True)
class Histogram:
    """Symbol counts with the sampling regime that produced them.

    For ``regime == "multinomial"`` the counts sum to ``n``; for
    ``"poissonized"`` the counts are independent Poi(n p_i) and ``n`` is the
    intensity.
    """

    counts: np.ndarray
    n: int
    regime: str = MULTINOMIAL

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1:
            raise ValueError("counts must be 1-d")
        if c.size and (np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0))):
            raise ValueError("counts must be nonnegative integers")
        c = c.astype(np.int64)
        if self.regime not in (MULTINOMIAL, POISSONIZED):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == MULTINOMIAL and int(c.sum()) != self.n:
            raise ValueError(f"multinomial counts sum to {int(c.sum())}, expected n={self.n}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return self.counts.size

    @classmethod
    def from_counts(cls, counts) -> "Histogram":
        c = np.asarray(counts, dtype=np.int64)
        return cls(c, int(c.sum()), MULTINOMIAL)


@dataclass(frozen=True)
class SplitHistograms:
    """Two independent Poissonized histograms: estimation and selection."""

    primary: Histogram
    selector: Histogram
    base_n: int

    def __post_init__(self):
        if self.primary.k != self.selector.k:
            raise ValueError("split histograms must share the alphabet")


def make_rng(seed, *stream) -> np.random.Generator:
    """Generator for ``stream`` (e.g. cell, trial) derived from a master seed.

    Streams are independent of scheduling: the same (seed, *stream) always
    yields the same generator state.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def sample_multinomial(P, n: int, seed=0) -> Histogram:
    if n < 0:
        raise ValueError("n must be >= 0")
    P = as_prob(P)
    rng = make_rng(seed)
    counts = rng.multinomial(n, _renormalized(P.p))
    return Histogram(counts, int(n), MULTINOMIAL)


def _renormalized(p):
    # multinomial draws reject sum(p) > 1 by rounding
    return p / math.fsum(p)


def sample_poisson(P, n: int, seed=0) -> Histogram:
    """Independent Poi(n p_i) counts."""
    P = as_prob(P)
    rng = make_rng(seed)
    return Histogram(rng.poisson(n * P.p), int(n), POISSONIZED)


def poissonize_and_split(P, n: int, seed=0, thinning: bool = False) -> SplitHistograms:
    """Two independent histograms with marginals Poi(n p_i).

    The default draws both directly per symbol.  ``thinning=True`` follows the
    literal construction: n' ~ Poi(2n) samples from P, each assigned to one of
    the two halves by a fair coin.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    P = as_prob(P)
    rng = make_rng(seed)
    if thinning:
        total = rng.poisson(2 * n)
        draws = rng.multinomial(total, _renormalized(P.p))
        first = rng.binomial(draws, 0.5)
        a, b = first, draws - first
    else:
        lam = n * P.p
        a = rng.poisson(lam)
        b = rng.poisson(lam)
    return SplitHistograms(Histogram(a, n, POISSONIZED), Histogram(b, n, POISSONIZED), int(n))


# -- distribution presets -------------------------------------------------------

DISTRIBUTIONS = ("uniform", "zipf", "two_point", "half_uniform")


def distribution_zoo(name: str, k: int, **params) -> ProbabilityVector:
    """Preset distributions on k symbols.

    uniform
        1/k each.
    zipf (s=1.0)
        p_i proportional to i**-s.
    two_point (p=0.5)
        (1 - p, p/(k-1), ..., p/(k-1)).
    half_uniform (tiny=1e-3)
        half the symbols share mass 1 - tiny, the rest share ``tiny``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if name == "uniform":
        p = np.full(k, 1.0 / k)
    elif name == "zipf":
        w = np.arange(1, k + 1, dtype=float) ** -float(params.get("s", 1.0))
        p = w / w.sum()
    elif name == "two_point":
        q = float(params.get("p", 0.5))
        p = np.full(k, q / (k - 1))
        p[0] = 1.0 - q
    elif name == "half_uniform":
        tiny = float(params.get("tiny", 1e-3))
        h = k // 2
        p = np.concatenate((np.full(h, (1 - tiny) / h), np.full(k - h, tiny / (k - h))))
    else:
        raise ValueError(f"unknown distribution {name!r}; expected one of {DISTRIBUTIONS}")
    return ProbabilityVector(p)


# -- I/O ------------------------------------------------------------------------


def write_histogram_csv(hist: Histogram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["symbol_index", "count"])
        for i, c in enumerate(hist.counts, start=1):
            w.writerow([i, int(c)])


def read_histogram_csv(path_or_text, k: int | None = None) -> Histogram:
    """Parse ``symbol_index,count`` rows (1-based indices, optional header)."""
    text = _read(path_or_text)
    rows = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip() == "symbol_index":
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
        try:
            idx, cnt = int(row[0]), int(row[1])
        except ValueError:
            raise ParseError(f"non-integer field in {row!r}", lineno) from None
        if idx < 1 or cnt < 0:
            raise ParseError("symbol index must be >= 1 and count >= 0", lineno)
        if k is not None and idx > k:
            raise ParseError(f"symbol index {idx} exceeds k={k}", lineno)
        if idx in rows:
            raise ParseError(f"duplicate symbol index {idx}", lineno)
        rows[idx] = cnt
    if not rows:
        raise ParseError("no histogram rows")
    size = k or max(rows)
    counts = np.zeros(size, dtype=np.int64)
    for idx, cnt in rows.items():
        counts[idx - 1] = cnt
    return Histogram.from_counts(counts)


def read_samples(path_or_text, k: int) -> Histogram:
    """Newline-delimited integer samples in [1, k] to a multinomial histogram."""
    text = _read(path_or_text)
    counts = np.zeros(k, dtype=np.int64)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            x = int(line)
        except ValueError:
            raise ParseError(f"not an integer: {line!r}", lineno) from None
        if not 1 <= x <= k:
            raise ParseError(f"sample {x} outside [1, {k}]", lineno)
        counts[x - 1] += 1
    return Histogram.from_counts(counts)


def _read(path_or_text) -> str:
    if isinstance(path_or_text, Path):
        return path_or_text.read_text()
    if isinstance(path_or_text, str) and "\n" not in path_or_text and Path(path_or_text).exists():
        return Path(path_or_text).read_text()
    return str(path_or_text)
