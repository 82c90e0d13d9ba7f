"""Calibration diagnostics for regression uncertainties with tied values."""
from .binning import (BinPartition, BinStats, TiePolicy, bin_stats, equal_count_bins,
                      order_records, partition)
from .data import (Dataset, FixedLevels, LogUniform, StratificationProfile, SyntheticSpec,
                   generate_synthetic, load_dataset, stratification_profile, write_dataset)
from .intercept import (InterceptFit, MetricSeries, default_grid, fit_intercept,
                        metric_series, validate)
from .kernels import BACKEND
from .metrics import AverageCalibration, MetricKind, average_calibration, ence, zve
from .recalibration import (RecalibrationModel, apply, fit_centered_isotonic,
                            fit_isotonic)
from .sensitivity import (SensitivityReport, VerdictFractionReport, mc_metric,
                          mc_verdict_fraction, worst_case_permutation)

__version__ = "0.1.0"
