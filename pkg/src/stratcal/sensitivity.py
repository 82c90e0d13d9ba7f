"""Order sensitivity of binned statistics on datasets with tied uncertainties.

Draw ``k`` of a study orders ties with the seed ``derive_seed(master_seed,
DRAWS, k)``, so every draw can be replayed on its own and results are
gathered by draw index whatever the number of worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics, rng
from .binning import OrderedData, TiePolicy, order_records
from .data import Dataset
from .errors import AnalysisError, FitError, MetricError, StatisticsError
from .intercept import (DEFAULT_MIN_BIN_SIZE, DEFAULT_SQRTN_MIN, InterceptFit,
                        default_grid, fit_intercept, metric_series)
from .metrics import MetricKind

DEFAULT_DRAWS = 250
MAX_FAILED_FRACTION = 0.01


def draw_policy(master_seed: int, k: int) -> TiePolicy:
    return TiePolicy.random(rng.derive_seed(master_seed, rng.DRAWS, k))


def worst_case_permutation(d: Dataset) -> np.ndarray:
    """Sort by uncertainty, ties by increasing ``|E|``."""
    return order_records(d, TiePolicy.abs_error())


def _map(fn, n, workers):
    if workers is None or workers <= 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def _check_failures(failures, n_draws):
    if len(failures) > MAX_FAILED_FRACTION * n_draws:
        k, msg = failures[0]
        raise AnalysisError(f"{len(failures)} of {n_draws} draws failed (first: draw {k}: {msg})")


def _value_or_none(metric, d, policy, N, backend):
    try:
        return metrics.compute(metric, OrderedData(d, order_records(d, policy)).stats(N, backend))
    except (MetricError, StatisticsError):
        return None


@dataclass(frozen=True)
class SensitivityReport:
    metric: MetricKind
    N: int
    n_draws: int
    master_seed: int
    samples: np.ndarray
    keep_order_value: float | None
    worst_case_value: float | None
    failures: list = field(default_factory=list)

    @property
    def valid_samples(self):
        return self.samples[np.isfinite(self.samples)]

    # centred on the first sample so that identical draws give sd == 0 exactly
    @property
    def mean(self) -> float:
        v = self.valid_samples
        return float(v[0] + np.mean(v - v[0]))

    @property
    def sd(self) -> float:
        v = self.valid_samples
        return float(np.std(v - v[0], ddof=1))

    def to_dict(self, include_samples=False):
        out = {
            "metric": self.metric.value,
            "N": self.N,
            "n_draws": self.n_draws,
            "master_seed": self.master_seed,
            "mean": self.mean,
            "sd": self.sd,
            "min": float(self.valid_samples.min()),
            "max": float(self.valid_samples.max()),
            "keep_order_value": self.keep_order_value,
            "worst_case_value": self.worst_case_value,
            "n_failed": len(self.failures),
            "failures": [{"draw": k, "error": m} for k, m in self.failures],
        }
        if include_samples:
            out["samples"] = self.samples.tolist()
        return out


def mc_metric(d: Dataset, metric, N: int, n_draws: int = DEFAULT_DRAWS, master_seed: int = 0,
              workers: int | None = None, backend=None) -> SensitivityReport:
    """Distribution of a binned metric over random orderings of tied records."""
    metric = MetricKind.parse(metric)
    if n_draws < 2:
        raise ValueError("n_draws must be >= 2")

    def one(k):
        od = OrderedData(d, order_records(d, draw_policy(master_seed, k)))
        try:
            return metrics.compute(metric, od.stats(N, backend)), None
        except (MetricError, StatisticsError) as exc:
            return float("nan"), str(exc)

    results = _map(one, n_draws, workers)
    samples = np.array([v for v, _ in results])
    failures = [(k, msg) for k, (_, msg) in enumerate(results) if msg is not None]
    _check_failures(failures, n_draws)
    return SensitivityReport(
        metric, int(N), n_draws, int(master_seed), samples,
        _value_or_none(metric, d, TiePolicy.keep(), N, backend),
        _value_or_none(metric, d, TiePolicy.abs_error(), N, backend),
        failures,
    )


@dataclass(frozen=True)
class VerdictFractionReport:
    metric: MetricKind
    n_draws: int
    master_seed: int
    grid: list
    sqrtN_min: float
    min_bin_size_floor: int
    fits: list
    keep_order_fit: InterceptFit | None
    failures: list = field(default_factory=list)

    @property
    def n_pass(self) -> int:
        return sum(1 for f in self.fits if f is not None and f.verdict)

    @property
    def pass_fraction(self) -> float:
        return self.n_pass / self.n_draws

    def to_dict(self, include_fits=False):
        ok = [f for f in self.fits if f is not None]
        a = np.array([f.intercept for f in ok])
        out = {
            "metric": self.metric.value,
            "n_draws": self.n_draws,
            "master_seed": self.master_seed,
            "grid": self.grid,
            "sqrtN_min": self.sqrtN_min,
            "min_bin_size_floor": self.min_bin_size_floor,
            "pass_fraction": self.pass_fraction,
            "n_pass": self.n_pass,
            "intercept_mean": float(a.mean()) if a.size else None,
            "intercept_sd": float(a.std(ddof=1)) if a.size > 1 else None,
            "keep_order_fit": None if self.keep_order_fit is None else self.keep_order_fit.to_dict(),
            "n_failed": len(self.failures),
            "failures": [{"draw": k, "error": m} for k, m in self.failures],
        }
        if include_fits:
            out["fits"] = [None if f is None else f.to_dict() for f in self.fits]
        return out


def mc_verdict_fraction(d: Dataset, metric, grid=None, sqrtN_min: float = DEFAULT_SQRTN_MIN,
                        min_bin_size_floor: int = DEFAULT_MIN_BIN_SIZE, n_draws: int = DEFAULT_DRAWS,
                        master_seed: int = 0, workers: int | None = None,
                        backend=None) -> VerdictFractionReport:
    """Fraction of random tie orderings for which the intercept test passes."""
    metric = MetricKind.parse(metric)
    if n_draws < 2:
        raise ValueError("n_draws must be >= 2")
    grid = default_grid(d.size, min_bin_size_floor) if grid is None else [int(n) for n in grid]

    def fit_for(policy):
        s = metric_series(d, policy, metric, grid, backend=backend)
        return fit_intercept(s, sqrtN_min, min_bin_size_floor)

    def one(k):
        try:
            return fit_for(draw_policy(master_seed, k)), None
        except FitError as exc:
            return None, str(exc)

    results = _map(one, n_draws, workers)
    failures = [(k, msg) for k, (_, msg) in enumerate(results) if msg is not None]
    _check_failures(failures, n_draws)
    try:
        keep_fit = fit_for(TiePolicy.keep())
    except FitError:
        keep_fit = None
    return VerdictFractionReport(metric, n_draws, int(master_seed), grid, sqrtN_min,
                                 min_bin_size_floor, [f for f, _ in results], keep_fit, failures)


def is_tie_free(d: Dataset) -> bool:
    return np.unique(d.uncertainties).size == d.size


def jitter_ties(d: Dataset) -> Dataset:
    """Break every tie by a strictly increasing, rank-preserving nudge.

    Tied values are spread over the gap to the next distinct value in
    intrinsic order, so the result has no ties and the ``keep`` order of the
    original is the unique sort order of the result.
    """
    u = d.uncertainties
    perm = np.argsort(u, kind="stable")
    us = u[perm]
    vals, first, counts = np.unique(us, return_index=True, return_counts=True)
    nxt = np.append(vals[1:], vals[-1] * 2 if vals[-1] > 0 else 1.0)
    gap = (nxt - vals) / 2
    rank = np.arange(u.size) - np.repeat(first, counts)
    step = np.repeat(gap / counts, counts)
    out = np.empty_like(u)
    out[perm] = us + rank * step
    if np.unique(out).size != u.size:  # only if gaps underflow
        raise AnalysisError("cannot break ties without changing value ranks")
    return d.with_uncertainties(out)


def fraction_tied(d: Dataset) -> float:
    _, counts = np.unique(d.uncertainties, return_counts=True)
    return float(counts[counts > 1].sum()) / d.size

