"""Monotone recalibration of squared uncertainties.

Both models are fitted on ``x = u**2`` against ``y = E**2``. The isotonic
(step) model is piecewise constant, so every record of a level set gets the
same recalibrated uncertainty. The centered model keeps the same level values
but anchors each one at the weighted centroid of its level set and
interpolates linearly between centroids, which removes the ties inside the
data range.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FitError, InputError

STEP = "isotonic_step"
CENTERED = "centered_isotonic"
KINDS = (STEP, CENTERED)


@dataclass(frozen=True, eq=False)
class RecalibrationModel:
    kind: str
    knots_x: np.ndarray
    knots_y: np.ndarray
    fitted: np.ndarray | None = None  # fitted y per training record, input order

    def __post_init__(self):
        kx = np.asarray(self.knots_x, dtype=float)
        ky = np.asarray(self.knots_y, dtype=float)
        if self.kind not in KINDS:
            raise InputError(f"unknown model kind {self.kind!r}")
        if kx.ndim != 1 or kx.shape != ky.shape or kx.size == 0:
            raise InputError("knots must be a nonempty list of (x, y) pairs")
        if not (np.all(np.isfinite(kx)) and np.all(np.isfinite(ky))):
            raise InputError("knots must be finite")
        if np.any(np.diff(kx) <= 0):
            raise InputError("knot x values must be strictly increasing")
        if np.any(np.diff(ky) < 0):
            raise InputError("knot y values must be non-decreasing")
        if np.any(ky < 0):
            raise InputError("knot y values must be >= 0")
        object.__setattr__(self, "knots_x", kx)
        object.__setattr__(self, "knots_y", ky)

    @property
    def n_levels(self) -> int:
        return int(self.knots_x.size)

    @property
    def knots(self):
        return list(zip(self.knots_x.tolist(), self.knots_y.tolist()))

    def predict(self, x) -> np.ndarray:
        """Model value at squared uncertainty ``x``, clamped outside the knots."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite query")
        if self.kind == STEP:
            idx = np.searchsorted(self.knots_x, x, side="right") - 1
            return self.knots_y[np.clip(idx, 0, None)]
        return np.interp(x, self.knots_x, self.knots_y)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "knots": [list(k) for k in self.knots]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, obj) -> "RecalibrationModel":
        try:
            knots = np.asarray(obj["knots"], dtype=float).reshape(-1, 2)
            return cls(obj["kind"], knots[:, 0], knots[:, 1])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed model: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "RecalibrationModel":
        return cls.from_dict(json.loads(text))


def _check_inputs(x, y, w):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise FitError("x and y must be 1-d sequences of equal length")
    if x.size < 2:
        raise FitError("need at least 2 points")
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    if w.shape != x.shape:
        raise FitError("weights must match x in length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise FitError("inputs must be finite")
    if np.any(w <= 0):
        raise FitError("weights must be > 0")
    if np.any(y < 0):
        raise FitError("y values are squared errors and must be >= 0")
    return x, y, w


def _level_sets(x, y, w, backend=None):
    """Pool tied x, run PAVA, and describe the resulting level sets."""
    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]
    ux, first, inv = np.unique(xs, return_index=True, return_inverse=True)
    gw = np.add.reduceat(ws, first)
    gy = np.add.reduceat(ws * ys, first) / gw
    values, _, starts = kernels.pava(gy, gw, backend)
    block = np.searchsorted(starts, np.arange(ux.size), side="right") - 1
    fitted = np.empty_like(y)
    fitted[order] = values[block[inv]]
    centroid = np.add.reduceat(gw * ux, starts) / np.add.reduceat(gw, starts)
    return ux[starts], centroid, values, fitted


def pava(y, w=None, backend=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of ``y`` in the given order."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    values, _, starts = kernels.pava(y, w, backend)
    return np.repeat(values, np.diff(np.append(starts, y.size)))


def fit_isotonic(x, y, w=None, backend=None) -> RecalibrationModel:
    """Step model: one knot per level set at its smallest x."""
    x, y, w = _check_inputs(x, y, w)
    lo, _, values, fitted = _level_sets(x, y, w, backend)
    return RecalibrationModel(STEP, lo, values, fitted)


def fit_centered_isotonic(x, y, w=None, backend=None) -> RecalibrationModel:
    """Centered model: one knot per level set at its weighted x centroid."""
    x, y, w = _check_inputs(x, y, w)
    _, centroid, values, fitted = _level_sets(x, y, w, backend)
    return RecalibrationModel(CENTERED, centroid, values, fitted)


def fit(kind, x, y, w=None, backend=None) -> RecalibrationModel:
    if kind in (STEP, "isotonic", "step"):
        return fit_isotonic(x, y, w, backend)
    if kind in (CENTERED, "centered", "cir"):
        return fit_centered_isotonic(x, y, w, backend)
    raise InputError(f"unknown model kind {kind!r}")


def fit_dataset(kind, d, backend=None) -> RecalibrationModel:
    """Fit ``E**2`` against ``u**2`` for a dataset."""
    return fit(kind, d.uncertainties ** 2, d.errors ** 2, backend=backend)


def apply(m: RecalibrationModel, u) -> np.ndarray:
    """Recalibrated uncertainties ``sqrt(f(u**2))``."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InputError("non-finite uncertainty")
    if np.any(u <= 0):
        raise InputError("uncertainties must be > 0")
    return np.sqrt(m.predict(u * u))
