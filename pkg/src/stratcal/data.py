"""Datasets of (error, uncertainty) pairs: loading, writing, stratification
profiles and synthetic generation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .errors import DatasetError, SchemaError, SpecError

SCHEMAS = {
    "direct": ("e", "u"),
    "reference": ("r", "v", "uv"),
}


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Errors ``E`` and uncertainties ``u`` in their intrinsic record order.

    The order is kept exactly as given: it decides how tied uncertainties
    fall into bins under the ``keep`` tie policy.
    """

    errors: np.ndarray
    uncertainties: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        errors = _frozen(self.errors)
        unc = _frozen(self.uncertainties)
        if errors.ndim != 1 or unc.ndim != 1:
            raise DatasetError("errors and uncertainties must be one-dimensional")
        if errors.shape != unc.shape:
            raise DatasetError(
                f"length mismatch: {errors.size} errors vs {unc.size} uncertainties")
        if errors.size < 2:
            raise DatasetError(f"dataset needs at least 2 records, got {errors.size}")
        bad = np.flatnonzero(~np.isfinite(errors))
        if bad.size:
            raise DatasetError(f"non-finite error at row {bad[0]}")
        bad = np.flatnonzero(~np.isfinite(unc) | ~(unc > 0))
        if bad.size:
            raise DatasetError(
                f"uncertainty must be finite and > 0 (row {bad[0]}: {unc[bad[0]]!r})")
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "uncertainties", unc)

    @property
    def size(self) -> int:
        return int(self.errors.size)

    M = size

    @property
    def z(self) -> np.ndarray:
        return self.errors / self.uncertainties

    def permuted(self, perm) -> "Dataset":
        perm = np.asarray(perm)
        return Dataset(self.errors[perm], self.uncertainties[perm], self.provenance)

    def with_uncertainties(self, u) -> "Dataset":
        return Dataset(self.errors, u, self.provenance)

    def summary(self) -> dict:
        return {
            "M": self.size,
            "provenance": self.provenance,
            "u_min": float(self.uncertainties.min()),
            "u_max": float(self.uncertainties.max()),
            "n_unique_u": int(np.unique(self.uncertainties).size),
        }

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.errors, other.errors)
                and np.array_equal(self.uncertainties, other.uncertainties))


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------

def _split_rows(text):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise SchemaError("empty input: no header line")
    header = lines[0]
    if "," in header:
        rows = list(csv.reader(lines))
        rows = [[c.strip() for c in r] for r in rows]
    else:
        rows = [ln.split() for ln in lines]
    return [c.strip('"').lower() for c in rows[0]], rows[1:]


def detect_schema(columns: Sequence[str]) -> str:
    cols = set(columns)
    for name in ("direct", "reference"):
        if set(SCHEMAS[name]) <= cols:
            return name
    raise SchemaError(f"cannot detect schema from header {list(columns)}; "
                      "expected columns E,u or R,V,uV")


def load_dataset(source, schema: str | None = None, provenance: str | None = None) -> Dataset:
    """Read a delimited table with a header line.

    ``source`` is a path or a text stream. Columns are matched
    case-insensitively: ``E,u`` for the ``direct`` schema, ``R,V,uV`` for
    ``reference`` (then ``E = R - V`` and ``u = uV``). ``schema=None`` picks
    whichever set of columns the header contains. Comma or whitespace
    separation is detected from the header line.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text()
        provenance = provenance if provenance is not None else str(path)
    else:
        text = source.read()
        provenance = provenance or ""

    columns, rows = _split_rows(text)
    if schema is None:
        schema = detect_schema(columns)
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}")
    idx = {}
    for name in SCHEMAS[schema]:
        if name not in columns:
            raise SchemaError(f"missing column {name!r} for schema {schema!r} "
                              f"(header: {columns})")
        idx[name] = columns.index(name)

    table = {name: np.empty(len(rows)) for name in idx}
    for i, row in enumerate(rows):
        for name, j in idx.items():
            try:
                table[name][i] = float(row[j])
            except (IndexError, ValueError):
                raise DatasetError(f"row {i}: cannot parse column {name!r}") from None

    if schema == "reference":
        errors, unc = table["r"] - table["v"], table["uv"]
    else:
        errors, unc = table["e"], table["u"]
    return Dataset(errors, unc, provenance)


def write_dataset(d: Dataset, dest) -> None:
    """Write ``d`` as ``E,u`` CSV; floats use their shortest exact repr."""
    buf = io.StringIO()
    buf.write("E,u\n")
    for e, u in zip(d.errors.tolist(), d.uncertainties.tolist()):
        buf.write(f"{e!r},{u!r}\n")
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(buf.getvalue())
    else:
        dest.write(buf.getvalue())


# --------------------------------------------------------------------------
# stratification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StratificationProfile:
    values: np.ndarray
    counts: np.ndarray

    @property
    def M(self) -> int:
        return int(self.counts.sum())

    @property
    def n_unique(self) -> int:
        return int(self.counts.size)

    @property
    def n_singletons(self) -> int:
        return int(np.count_nonzero(self.counts == 1))

    @property
    def counts_desc(self) -> np.ndarray:
        return np.sort(self.counts)[::-1]

    @property
    def strata(self):
        return list(zip(self.values.tolist(), self.counts.tolist()))

    def top_total(self, k: int) -> int:
        """Number of points in the ``k`` most populated strata."""
        return int(self.counts_desc[:k].sum())

    def n_strata_above(self, threshold: int) -> int:
        return int(np.count_nonzero(self.counts > threshold))

    def summary(self) -> dict:
        return {
            "M": self.M,
            "n_unique": self.n_unique,
            "n_singletons": self.n_singletons,
            "n_multi": self.n_unique - self.n_singletons,
            "points_in_multi": self.M - self.n_singletons,
            "largest_stratum": int(self.counts.max()),
            "n_strata_above_500": self.n_strata_above(500),
        }


def stratification_profile(d: Dataset, value_tolerance: float = 0.0) -> StratificationProfile:
    """Group equal uncertainties into strata.

    With ``value_tolerance > 0``, sorted values whose gap to the previous one
    is at most the tolerance join its stratum (the stratum keeps its smallest
    value).
    """
    if value_tolerance < 0:
        raise ValueError("value_tolerance must be >= 0")
    u = np.sort(d.uncertainties)
    if value_tolerance == 0:
        values, counts = np.unique(u, return_counts=True)
        return StratificationProfile(values, counts)
    new = np.empty(u.size, dtype=bool)
    new[0] = True
    new[1:] = np.diff(u) > value_tolerance
    starts = np.flatnonzero(new)
    counts = np.diff(np.append(starts, u.size))
    return StratificationProfile(u[starts], counts)


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def check(self):
        if not (self.lo > 0 and self.hi > self.lo and math.isfinite(self.hi)):
            raise SpecError(f"log-uniform law needs 0 < lo < hi, got ({self.lo}, {self.hi})")

    def draw(self, gen, m):
        return np.exp(gen.uniform(math.log(self.lo), math.log(self.hi), size=m))

    def to_dict(self):
        return {"law": "log-uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class FixedLevels:
    levels: tuple
    weights: tuple | None = None

    def _p(self):
        w = np.ones(len(self.levels)) if self.weights is None else np.asarray(self.weights, float)
        return w / w.sum()

    def check(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.size == 0 or not np.all(np.isfinite(lv)) or np.any(lv <= 0):
            raise SpecError("fixed levels must be a nonempty list of positive values")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != lv.shape or np.any(w < 0) or not w.sum() > 0:
                raise SpecError("level weights must be nonnegative, one per level, not all 0")

    def draw(self, gen, m):
        return gen.choice(np.asarray(self.levels, dtype=float), size=m, p=self._p())

    def to_dict(self):
        return {"law": "fixed-levels", "levels": list(self.levels),
                "weights": None if self.weights is None else list(self.weights)}


@dataclass(frozen=True)
class SyntheticSpec:
    M: int
    uncertainty_law: LogUniform | FixedLevels = field(default_factory=lambda: LogUniform(0.01, 1.0))
    miscalibration: float = 1.0
    seed: int = 0

    def check(self):
        if int(self.M) != self.M or self.M < 2:
            raise SpecError(f"M must be an integer >= 2, got {self.M}")
        if not (self.miscalibration > 0 and math.isfinite(self.miscalibration)):
            raise SpecError("miscalibration factor must be > 0")
        self.uncertainty_law.check()

    def to_dict(self):
        return {"M": self.M, **self.uncertainty_law.to_dict(),
                "miscalibration": self.miscalibration, "seed": self.seed}


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw ``u`` from the law and set ``E = c * u * eps`` with standard normal
    ``eps``; ``c = 1`` gives a calibrated dataset."""
    spec.check()
    gen = rng.substream(spec.seed, rng.SYNTHETIC)
    u = spec.uncertainty_law.draw(gen, spec.M)
    eps = gen.standard_normal(spec.M)
    errors = spec.miscalibration * u * eps
    return Dataset(errors, u, provenance=f"synthetic(seed={spec.seed})")
