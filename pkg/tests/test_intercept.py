import math

import numpy as np
import pytest

from stratcal.binning import TiePolicy
from stratcal.data import LogUniform, SyntheticSpec, generate_synthetic
from stratcal.errors import FitError, PartitionError
from stratcal.intercept import (InterceptFit, MetricSeries, SeriesPoint, default_grid,
                                fit_intercept, metric_series, ols_line, validate)
from stratcal.metrics import MetricKind

from oracles import lstsq_intercept


def series(points, metric=MetricKind.ENCE, min_bin=100):
    return MetricSeries(tuple(SeriesPoint(int(round(s * s)), s, v, min_bin) for s, v in points),
                        metric)


def fit_with_ci(lo, hi, target):
    metric = MetricKind.ENCE if target == 0 else MetricKind.ZVE
    return InterceptFit(metric, (lo + hi) / 2, 0.0, lo, hi, target, 3, 0.0, 0.0)


def test_exactly_collinear_points():
    f = fit_intercept(series([(7, 0.07), (8, 0.08), (9, 0.09)]))
    assert f.intercept == pytest.approx(0, abs=1e-14)
    assert f.slope == pytest.approx(0.01, rel=1e-12)
    assert f.ci_hi - f.ci_lo < 1e-12
    assert f.verdict and f.n_points_used == 3


@pytest.mark.parametrize("lo, hi, target, expected", [
    (-0.01, 0.02, 0, True),
    (0.01, 0.02, 0, False),
    (0.98, 1.30, 1, True),
])
def test_validate_examples(lo, hi, target, expected):
    assert validate(fit_with_ci(lo, hi, target)) is expected


def test_ols_matches_lstsq_oracle():
    gen = np.random.default_rng(1)
    x = np.sqrt(np.arange(40, 300, 17))
    y = 0.01 + 0.004 * x + gen.normal(0, 0.002, x.size)
    a, b, hw, s, se_b = ols_line(x, y)
    a_ref, b_ref, se_ref = lstsq_intercept(x, y)
    assert a == pytest.approx(a_ref, rel=1e-10)
    assert b == pytest.approx(b_ref, rel=1e-10)
    from scipy.stats import t
    assert hw == pytest.approx(t.ppf(0.975, x.size - 2) * se_ref, rel=1e-10)


def test_residuals_orthogonal(tie_free):
    s = metric_series(tie_free, metric="ZVE", grid=default_grid(tie_free.size))
    f = fit_intercept(s)
    keep = s.retained()
    x, y = s.sqrtN[keep], s.values[keep]
    r = y - (f.intercept + f.slope * x)
    scale = np.abs(y).sum()
    assert abs(r.sum()) < 1e-10 * scale
    assert abs(r @ x) < 1e-10 * scale * x.max()


def test_fit_filters():
    pts = [(2, 5.0), (5, 5.0), (6, 9.0), (7, 0.07), (8, 0.08), (9, 0.09)]
    f = fit_intercept(series(pts))
    assert f.n_points_used == 3 and f.slope == pytest.approx(0.01)
    small_bins = MetricSeries(series(pts).points[:3] + tuple(
        SeriesPoint(p.N, p.sqrtN, p.value, 10) for p in series(pts).points[3:]), MetricKind.ENCE)
    with pytest.raises(FitError):
        fit_intercept(small_bins)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_intercept(series([(7, 1), (8, 1)]))
    with pytest.raises(FitError):
        ols_line([7, 7, 7], [1, 2, 3])


def test_unusable_points_are_skipped():
    s = series([(7, 0.07), (8, 0.08), (9, 0.09), (10, float("nan"))])
    assert fit_intercept(s).n_points_used == 3


def test_shrinking_grid_to_retained_points(tie_free):
    grid = default_grid(tie_free.size)
    full = metric_series(tie_free, grid=grid)
    kept = [p.N for p, k in zip(full.points, full.retained()) if k]
    a = fit_intercept(full)
    b = fit_intercept(metric_series(tie_free, grid=kept))
    assert (a.intercept, a.slope, a.ci_lo, a.ci_hi) == (b.intercept, b.slope, b.ci_lo, b.ci_hi)


def test_series_structure(tie_free):
    s = metric_series(tie_free, grid=[4, 9, 16])
    assert s.sqrtN.tolist() == [2, 3, 4]
    assert [p.min_bin_size for p in s.points] == [tie_free.size // n for n in (4, 9, 16)]


def test_series_identical_across_policies_for_tie_free(tie_free):
    ref = metric_series(tie_free, TiePolicy.keep(), "ZVE").values
    for p in (TiePolicy.abs_error(), TiePolicy.random(1), TiePolicy.random(2)):
        assert np.array_equal(metric_series(tie_free, p, "ZVE").values, ref)


def test_series_grid_checks(tie_free):
    with pytest.raises(PartitionError):
        metric_series(tie_free, grid=[1, 4])
    with pytest.raises(PartitionError):
        metric_series(tie_free, grid=[9, 4])
    with pytest.raises(PartitionError):
        metric_series(tie_free, grid=[4, tie_free.size])


def test_series_records_metric_failures():
    from stratcal.data import Dataset
    # two records per bin with equal z give zero variance
    d = Dataset([1, 1, 2, 2, 3, -3, 1, 2], [1, 1, 2, 2, 1, 1, 1, 1.5])
    s = metric_series(d, metric="ZVE", grid=[2, 4])
    assert not s.points[1].usable and "variance" in s.points[1].error


def test_default_grid():
    g = default_grid(13885)
    assert g[0] == 4 and len(g) == 20
    assert all(b > a for a, b in zip(g, g[1:]))
    assert 13885 // g[-1] >= 30
    assert g[-1] == 13885 // 30
    with pytest.raises(PartitionError):
        default_grid(100)


def test_miscalibrated_series_is_practically_flat():
    d = generate_synthetic(SyntheticSpec(10_000, LogUniform(0.01, 1.0), 2.0, 3))
    for metric in ("ENCE", "ZVE"):
        s = metric_series(d, metric=metric)
        f = fit_intercept(s)
        x = s.sqrtN[s.retained()]
        swing = abs(f.slope) * (x.max() - x.min())
        assert swing < 0.05 * abs(f.intercept)
        assert not f.verdict


def test_calibrated_intercepts_near_target():
    d = generate_synthetic(SyntheticSpec(10_000, LogUniform(0.01, 1.0), 1.0, 3))
    assert abs(fit_intercept(metric_series(d, metric="ENCE")).intercept) < 0.03
    assert abs(fit_intercept(metric_series(d, metric="ZVE")).intercept - 1) < 0.06


def test_fit_dict_fields():
    f = fit_intercept(series([(7, 0.071), (8, 0.08), (9, 0.092)]))
    assert set(f.to_dict()) >= {"metric", "intercept", "slope", "ci_lo", "ci_hi", "target",
                                "verdict"}
    assert f.ci_lo <= f.intercept <= f.ci_hi
    assert math.isfinite(f.residual_sd)
