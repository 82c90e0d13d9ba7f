"""Bin-count independent validation.

For calibrated data the ENCE and ZVE mostly measure within-bin noise, which
grows like ``sqrt(N)``. Regressing the metric on ``sqrt(N)`` over a grid of bin
counts and reading off the intercept removes that dependence; calibration is
accepted when the 95% confidence interval of the intercept contains the
metric's target (0 for ENCE, 1 for ZVE).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import metrics
from .binning import OrderedData, TiePolicy, order_records
from .data import Dataset
from .errors import FitError, MetricError, PartitionError, StatisticsError
from .metrics import MetricKind

DEFAULT_SQRTN_MIN = 6.0
DEFAULT_MIN_BIN_SIZE = 30
DEFAULT_GRID_POINTS = 20


@dataclass(frozen=True)
class SeriesPoint:
    N: int
    sqrtN: float
    value: float
    min_bin_size: int
    error: str | None = None

    @property
    def usable(self) -> bool:
        return self.error is None and math.isfinite(self.value)


@dataclass(frozen=True)
class MetricSeries:
    points: tuple
    metric: MetricKind
    policy: dict = field(default_factory=dict)

    @property
    def N(self):
        return np.array([p.N for p in self.points])

    @property
    def sqrtN(self):
        return np.array([p.sqrtN for p in self.points])

    @property
    def values(self):
        return np.array([p.value for p in self.points])

    def retained(self, sqrtN_min=DEFAULT_SQRTN_MIN, min_bin_size_floor=DEFAULT_MIN_BIN_SIZE):
        return [p.usable and p.sqrtN > sqrtN_min and p.min_bin_size >= min_bin_size_floor
                for p in self.points]


def default_grid(M: int, min_bin_size_floor: int = DEFAULT_MIN_BIN_SIZE,
                 n_points: int = DEFAULT_GRID_POINTS, sqrtN_lo: float = 2.0) -> list[int]:
    """Bin counts with ``sqrt(N)`` evenly spaced from ``sqrtN_lo`` up to
    ``sqrt(M / min_bin_size_floor)``, rounded to distinct integers."""
    hi = math.sqrt(M / min_bin_size_floor)
    if hi <= sqrtN_lo:
        raise PartitionError(f"M={M} too small for bins of {min_bin_size_floor} points")
    grid = np.rint(np.linspace(sqrtN_lo, hi, n_points) ** 2).astype(int)
    grid = np.unique(np.minimum(grid, M // min_bin_size_floor))
    return [int(n) for n in grid if 2 <= n <= M // 2]


def metric_series(d: Dataset, policy: TiePolicy = TiePolicy(), metric=MetricKind.ENCE,
                  grid=None, permutation=None, backend=None) -> MetricSeries:
    """Evaluate ``metric`` for every bin count in ``grid``.

    The records are ordered once and the same order is used for every bin
    count. A bin count whose metric cannot be computed is kept in the series
    with its error message and a NaN value.
    """
    metric = MetricKind.parse(metric)
    M = d.size
    grid = default_grid(M) if grid is None else [int(n) for n in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PartitionError("bin-count grid must be strictly increasing")
    for n in grid:
        if not 2 <= n <= M / 2:
            raise PartitionError(f"bin count {n} outside [2, M/2] for M={M}")
    perm = order_records(d, policy) if permutation is None else permutation
    od = OrderedData(d, perm)
    points = []
    for n in grid:
        try:
            value, err = metrics.compute(metric, od.stats(n, backend)), None
        except (MetricError, StatisticsError) as exc:
            value, err = float("nan"), str(exc)
        points.append(SeriesPoint(n, math.sqrt(n), value, M // n, err))
    return MetricSeries(tuple(points), metric, policy.describe())


@dataclass(frozen=True)
class InterceptFit:
    metric: MetricKind
    intercept: float
    slope: float
    ci_lo: float
    ci_hi: float
    target: float
    n_points_used: int
    residual_sd: float
    slope_se: float

    @property
    def verdict(self) -> bool:
        return validate(self)

    def to_dict(self):
        return {
            "metric": self.metric.value,
            "intercept": self.intercept,
            "slope": self.slope,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "target": self.target,
            "verdict": self.verdict,
            "n_points_used": self.n_points_used,
        }


def ols_line(x, y, level=0.95):
    """Least-squares line ``y = a + b x`` with a t-based CI on ``a``.

    Returns ``(a, b, half_width, residual_sd, se_b)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = x.size
    if k < 3:
        raise FitError(f"need at least 3 points for the intercept fit, got {k}")
    xbar, ybar = x.mean(), y.mean()
    dx = x - xbar
    sxx = float(dx @ dx)
    if not sxx > 0:
        raise FitError("sqrt(N) has zero variance over the retained points")
    b = float(dx @ (y - ybar)) / sxx
    a = float(ybar - b * xbar)
    resid = y - (a + b * x)
    s = math.sqrt(float(resid @ resid) / (k - 2))
    se_a = s * math.sqrt(1.0 / k + xbar * xbar / sxx)
    tq = float(sps.t.ppf(0.5 + level / 2, k - 2))
    # never narrower than the rounding error of ybar - b * xbar
    hw = max(tq * se_a, 8 * np.finfo(float).eps * (abs(ybar) + abs(b * xbar)))
    return a, b, hw, s, s / math.sqrt(sxx)


def fit_intercept(s: MetricSeries, sqrtN_min: float = DEFAULT_SQRTN_MIN,
                  min_bin_size_floor: int = DEFAULT_MIN_BIN_SIZE, level: float = 0.95) -> InterceptFit:
    """Fit ``value = a + b sqrt(N)`` on points with ``sqrt(N) > sqrtN_min`` and
    at least ``min_bin_size_floor`` records per bin."""
    keep = s.retained(sqrtN_min, min_bin_size_floor)
    pts = [p for p, k in zip(s.points, keep) if k]
    a, b, hw, sd, se_b = ols_line([p.sqrtN for p in pts], [p.value for p in pts], level)
    return InterceptFit(s.metric, a, b, a - hw, a + hw, s.metric.target, len(pts), sd, se_b)


def validate(fit: InterceptFit) -> bool:
    return bool(fit.ci_lo <= fit.target <= fit.ci_hi)
