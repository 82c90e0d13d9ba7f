"""Calibration error statistics on binned data, plus average calibration."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .binning import BinStats
from .data import Dataset
from .errors import MetricError


class MetricKind(str, enum.Enum):
    ENCE = "ENCE"
    ZVE = "ZVE"

    @property
    def target(self) -> float:
        return 0.0 if self is MetricKind.ENCE else 1.0

    @classmethod
    def parse(cls, value) -> "MetricKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}; choose ENCE or ZVE") from None


def ence(stats: BinStats) -> float:
    """Mean over bins of ``|RMV - RMSE| / RMV``."""
    if len(stats) == 0:
        raise MetricError("ENCE of an empty bin set")
    if np.any(stats.rmv <= 0):
        k = int(np.argmax(stats.rmv <= 0))
        raise MetricError(f"RMV is zero in bin {k + 1}", bin_index=k)
    return float(np.mean(np.abs(stats.rmv - stats.rmse) / stats.rmv))


def zve(stats: BinStats) -> float:
    """``exp(mean |ln v_i|)`` over the binned z-score variances."""
    if len(stats) == 0:
        raise MetricError("ZVE of an empty bin set")
    v = stats.zvar
    bad = np.flatnonzero(~(v > 0) | ~np.isfinite(v))
    if bad.size:
        k = int(bad[0])
        raise MetricError(f"z-score variance is {v[k]} in bin {k + 1}; log undefined",
                          bin_index=k)
    return float(np.exp(np.mean(np.abs(np.log(v)))))


def compute(metric, stats: BinStats) -> float:
    return ence(stats) if MetricKind.parse(metric) is MetricKind.ENCE else zve(stats)


@dataclass(frozen=True)
class AverageCalibration:
    var_z: float
    rmv_rmse_ratio: float

    def to_dict(self):
        return {"var_z": self.var_z, "rmv_rmse_ratio": self.rmv_rmse_ratio}


def average_calibration(d: Dataset) -> AverageCalibration:
    """Whole-dataset checks: sample ``Var(Z)`` and ``RMV / RMSE``; both target 1."""
    u, e = d.uncertainties, d.errors
    rmse = np.sqrt(np.mean(e * e))
    ratio = np.sqrt(np.mean(u * u)) / rmse if rmse > 0 else float("inf")
    return AverageCalibration(float(np.var(d.z, ddof=1)), float(ratio))
