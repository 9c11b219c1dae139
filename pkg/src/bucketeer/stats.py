"""Pearson chi-square tests and the chi-square survival function."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bucketeer.errors import ConfigError, InputError, NumericalError, SampleSizeError

N_CELLS = 100
MIN_EXPECTED = 5.0
DEFAULT_ALPHA = 0.05

_MAX_ITER = 200
_EPS = 1e-12
_TINY = 1e-300


def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(a * math.log(x) - x - math.lgamma(a))
    raise NumericalError(f"incomplete gamma series did not converge for a={a}, x={x}")


def _gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(a * math.log(x) - x - math.lgamma(a))
    raise NumericalError(f"incomplete gamma continued fraction did not converge for a={a}, x={x}")


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise InputError(f"shape must be positive, got {a}")
    if x < 0:
        raise InputError(f"argument must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi_square_sf(statistic: float, df: int) -> float:
    """P(X >= statistic) for X ~ chi-square with ``df`` degrees of freedom."""
    if isinstance(df, bool) or int(df) != df or df < 1:
        raise InputError(f"df must be a positive integer, got {df!r}")
    if math.isnan(statistic) or statistic < 0:
        raise InputError(f"statistic must be non-negative, got {statistic!r}")
    if math.isinf(statistic):
        return 0.0
    p = gamma_q(df / 2.0, statistic / 2.0)
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class TestReport:
    statistic: float
    df: int
    p_value: float
    alpha: float = DEFAULT_ALPHA

    __test__ = False  # not a pytest class

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
        }


@dataclass(frozen=True)
class Histogram100:
    """Counts of users per bucket digit pair (0..99)."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CELLS,):
            raise InputError(f"histogram needs exactly {N_CELLS} cells, got shape {counts.shape}")
        if (counts < 0).any():
            raise InputError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_values(cls, values) -> Histogram100:
        return cls(np.bincount(np.asarray(values, dtype=np.int64), minlength=N_CELLS))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ContingencyTable:
    """r x c table of joint bucket counts (rows: experiment i, cols: experiment j)."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] < 2 or counts.shape[1] < 2:
            raise InputError(f"contingency table must be at least 2x2, got shape {counts.shape}")
        if (counts < 0).any():
            raise InputError("contingency counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_labels(cls, rows, cols, shape: tuple[int, int]) -> ContingencyTable:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        flat = np.bincount(rows * shape[1] + cols, minlength=shape[0] * shape[1])
        return cls(flat.reshape(shape))

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def expected(self) -> np.ndarray:
        return np.outer(self.row_sums, self.col_sums) / self.total


def _pearson(observed: np.ndarray, expected: np.ndarray) -> float:
    diff = observed.astype(np.float64) - expected
    return float(np.sum(diff * diff / expected))


def gof_uniform(hist: Histogram100, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Goodness of fit of a 100-cell histogram against the uniform distribution."""
    floor = int(MIN_EXPECTED * N_CELLS)
    if hist.total < floor:
        raise SampleSizeError(
            f"uniformity test needs at least {floor} observations "
            f"(expected count {MIN_EXPECTED:g} per cell), got {hist.total}"
        )
    expected = np.full(N_CELLS, hist.total / N_CELLS)
    stat = _pearson(hist.counts, expected)
    df = N_CELLS - 1
    return TestReport(stat, df, chi_square_sf(stat, df), alpha)


def gof_proportions(counts, percentages, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Goodness of fit of observed bucket counts against configured percentages.

    Buckets allocated 0% are dropped, unless users landed there anyway, which
    makes the statistic infinite.
    """
    counts = np.asarray(counts, dtype=np.int64)
    weights = np.asarray(percentages, dtype=np.float64)
    if counts.shape != weights.shape:
        raise InputError(f"{counts.size} counts for {weights.size} percentages")
    if (counts < 0).any():
        raise InputError("counts must be non-negative")
    total = int(counts.sum())
    live = weights > 0
    if live.sum() < 2:
        raise ConfigError("ratio test needs at least two buckets with positive allocation")
    df = int(live.sum()) - 1
    if counts[~live].any():
        return TestReport(math.inf, df, 0.0, alpha)
    expected = total * weights[live] / weights[live].sum()
    low = np.flatnonzero(expected < MIN_EXPECTED)
    if low.size:
        need = math.ceil(MIN_EXPECTED * weights[live].sum() / weights[live].min())
        raise SampleSizeError(
            f"expected count {expected[low[0]]:.3g} below {MIN_EXPECTED:g}; "
            f"need at least {need} observations, got {total}"
        )
    stat = _pearson(counts[live], expected)
    return TestReport(stat, df, chi_square_sf(stat, df), alpha)


def independence_test(table: ContingencyTable, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Pearson chi-square independence test, no continuity correction."""
    if table.total == 0:
        raise SampleSizeError("contingency table is empty")
    expected = table.expected()
    bad = np.argwhere(expected < MIN_EXPECTED)
    if bad.size:
        r, c = (int(v) for v in bad[0])
        raise SampleSizeError(
            f"expected count {expected[r, c]:.3g} in cell ({r}, {c}) is below {MIN_EXPECTED:g}"
        )
    stat = _pearson(table.counts, expected)
    rows, cols = table.counts.shape
    df = (rows - 1) * (cols - 1)
    return TestReport(stat, df, chi_square_sf(stat, df), alpha)
