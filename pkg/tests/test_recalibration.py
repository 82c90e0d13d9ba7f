import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratcal.data import Dataset, LogUniform, SyntheticSpec, generate_synthetic, \
    stratification_profile
from stratcal.errors import FitError, InputError
from stratcal.recalibration import (CENTERED, STEP, RecalibrationModel, apply, fit,
                                    fit_centered_isotonic, fit_dataset, fit_isotonic, pava)

from oracles import brute_isotonic


def test_fit_examples(backend):
    x = [1.0, 2.0, 3.0]
    np.testing.assert_allclose(fit_isotonic(x, [1, 2, 3], backend=backend).fitted, [1, 2, 3])
    assert brute_isotonic([3, 1, 2]) == [2, 2, 2]
    np.testing.assert_allclose(fit_isotonic(x, [3, 1, 2], backend=backend).fitted, [2, 2, 2])
    assert brute_isotonic([1, 3, 2]) == [1, 2.5, 2.5]
    np.testing.assert_allclose(fit_isotonic(x, [1, 3, 2], backend=backend).fitted, [1, 2.5, 2.5])


def test_centered_examples():
    m = fit_centered_isotonic([1, 2, 3], [1, 2, 4])
    assert m.knots == [(1, 1), (2, 2), (3, 4)]
    m = fit_centered_isotonic([1, 2, 3], [1, 3, 2])
    assert m.knots == [(1, 1), (2.5, 2.5)]
    assert m.predict(2.0) == 2.0
    m = fit_centered_isotonic([1, 2, 3, 4], [2, 2, 2, 2])
    assert m.n_levels == 1
    assert np.all(m.predict([0.5, 2, 9]) == 2)


def test_step_model_evaluation():
    m = fit_isotonic([1, 2, 3, 4], [1, 3, 2, 5])
    assert m.knots == [(1, 1), (2, 2.5), (4, 5)]
    np.testing.assert_array_equal(m.predict([0.1, 1, 1.5, 2, 3, 3.9, 4, 10]),
                                  [1, 1, 1, 2.5, 2.5, 2.5, 5, 5])


def test_tied_x_pooled_before_pava():
    m = fit_isotonic([1, 1, 2], [4, 0, 3], [1, 3, 1])
    np.testing.assert_allclose(m.fitted, [1, 1, 3])
    a = fit_isotonic([2, 1, 1], [3, 0, 4], [1, 3, 1])
    np.testing.assert_allclose(a.fitted, [3, 1, 1])


def test_apply_examples():
    x = np.array([0.25, 1.0, 4.0])
    m = fit_isotonic(x, [0.3, 0.2, 5.0])
    u = np.sqrt(x)
    np.testing.assert_allclose(apply(m, u) ** 2, m.fitted, rtol=1e-15)
    assert apply(m, [0.01])[0] == pytest.approx(np.sqrt(0.25))
    with pytest.raises(InputError):
        apply(m, [np.nan])
    with pytest.raises(InputError):
        apply(m, [0.0])


@pytest.mark.parametrize("x, y, w", [
    ([1, 2], [1], None),
    ([1], [1], None),
    ([1, 2], [1, 2], [1, 0]),
    ([1, 2], [1, -2], None),
    ([1, np.inf], [1, 2], None),
])
def test_fit_errors(x, y, w):
    with pytest.raises(FitError):
        fit_isotonic(x, y, w)
    with pytest.raises(FitError):
        fit_centered_isotonic(x, y, w)


def test_fit_dispatch(stratified):
    assert fit("isotonic", [1, 2], [1, 2]).kind == STEP
    assert fit("cir", [1, 2], [1, 2]).kind == CENTERED
    with pytest.raises(InputError):
        fit("spline", [1, 2], [1, 2])
    m = fit_dataset("centered", stratified)
    assert m.kind == CENTERED and m.n_levels <= 4


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.floats(0, 10), st.floats(0.5, 3)),
                min_size=2, max_size=40))
def test_level_sets_preserve_weighted_means(rows):
    x = np.array([r[0] for r in rows], float)
    y = np.array([r[1] for r in rows])
    w = np.array([r[2] for r in rows])
    m = fit_isotonic(x, y, w)
    assert np.sum(w * m.fitted) == pytest.approx(np.sum(w * y), rel=1e-9, abs=1e-9)
    for level in np.unique(m.fitted):
        sel = m.fitted == level
        assert np.sum(w[sel] * y[sel]) / np.sum(w[sel]) == pytest.approx(level, rel=1e-9,
                                                                          abs=1e-9)
    order = np.argsort(x, kind="stable")
    assert np.all(np.diff(m.fitted[order]) >= 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 10), st.floats(0, 10)), min_size=2, max_size=40),
       st.lists(st.floats(0.001, 20), min_size=2, max_size=50))
def test_apply_monotone(rows, queries):
    x = [r[0] for r in rows]
    y = [r[1] for r in rows]
    q = np.sort(np.sqrt(queries))
    for model in (fit_isotonic(x, y), fit_centered_isotonic(x, y)):
        out = apply(model, q)
        assert np.all(out >= 0) and np.all(np.diff(out) >= 0)
        ky = model.knots_y
        assert np.all(np.diff(ky) > 0)


def test_pava_helper_matches_oracle():
    y = [5, 1, 4, 2, 8, 7, 7, 3]
    np.testing.assert_allclose(pava(y), brute_isotonic(y), rtol=1e-14)


def test_stratification_contrast():
    d = generate_synthetic(SyntheticSpec(3000, LogUniform(0.05, 1.0), 1.0, 8))
    x, y = d.uncertainties ** 2, d.errors ** 2
    step = fit_isotonic(x, y)
    cir = fit_centered_isotonic(x, y)
    k = step.n_levels
    assert k < d.size
    after_step = stratification_profile(d.with_uncertainties(apply(step, d.uncertainties)))
    assert after_step.n_unique == k
    # inputs are all distinct; inside the centroid hull the centered map is strictly increasing
    inside = (x > cir.knots_x[0]) & (x < cir.knots_x[-1])
    out = apply(cir, d.uncertainties[inside])
    assert np.unique(out).size == inside.sum()


def test_model_json_round_trip():
    m = fit_centered_isotonic([1, 2, 3, 4], [1, 3, 2, 6])
    back = RecalibrationModel.from_json(m.to_json())
    assert back.kind == m.kind and back.knots == m.knots
    assert json.loads(m.to_json())["kind"] == "centered_isotonic"


@pytest.mark.parametrize("obj", [
    {"kind": "isotonic_step", "knots": [[1, 2], [2, 1]]},
    {"kind": "isotonic_step", "knots": [[2, 1], [1, 2]]},
    {"kind": "isotonic_step", "knots": [[1, -1]]},
    {"kind": "isotonic_step", "knots": []},
    {"kind": "spline", "knots": [[1, 1]]},
    {"knots": [[1, 1]]},
])
def test_model_loading_validates(obj):
    with pytest.raises(InputError):
        RecalibrationModel.from_dict(obj)


def test_recalibrated_dataset_usable():
    d = Dataset([0.1, -0.5, 0.3, 2.0, -1.0], [0.2, 0.4, 0.4, 1.0, 1.5])
    m = fit_dataset("isotonic", d)
    new = d.with_uncertainties(apply(m, d.uncertainties))
    assert new.size == d.size
