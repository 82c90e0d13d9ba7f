"""Ordering by uncertainty, equal-count bins and per-bin aggregates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, rng
from .data import Dataset
from .errors import PartitionError, StatisticsError

TIE_KINDS = ("keep", "random", "abs_error_asc")


@dataclass(frozen=True)
class TiePolicy:
    """How records sharing an uncertainty value are ordered.

    ``keep`` leaves them in intrinsic order, ``random`` shuffles them with a
    seeded generator, ``abs_error_asc`` sorts them by increasing ``|E|``
    (the adversarial case).
    """

    kind: str = "keep"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in TIE_KINDS:
            raise ValueError(f"unknown tie policy {self.kind!r}")
        if self.kind == "random" and self.seed is None:
            raise ValueError("random tie policy requires a seed")

    @classmethod
    def keep(cls):
        return cls("keep")

    @classmethod
    def random(cls, seed):
        return cls("random", int(seed))

    @classmethod
    def abs_error(cls):
        return cls("abs_error_asc")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "random":
            out["seed"] = self.seed
        return out


def order_records(d: Dataset, policy: TiePolicy = TiePolicy()) -> np.ndarray:
    """Permutation (0-based) sorting records by uncertainty under ``policy``."""
    u = d.uncertainties
    if policy.kind == "keep":
        return np.argsort(u, kind="stable")
    if policy.kind == "abs_error_asc":
        # lexsort is stable: equal (u, |E|) keep intrinsic order
        return np.lexsort((np.abs(d.errors), u))
    gen = rng.substream(policy.seed, rng.TIES)
    shuffled = gen.permutation(u.size)
    return shuffled[np.argsort(u[shuffled], kind="stable")]


def bin_sizes(M: int, N: int) -> np.ndarray:
    if not (1 <= N <= M):
        raise PartitionError(f"need 1 <= N <= M, got N={N}, M={M}")
    q, r = divmod(M, N)
    sizes = np.full(N, q, dtype=np.intp)
    sizes[:r] += 1
    return sizes


def equal_count_bins(M: int, N: int) -> np.ndarray:
    """Offsets ``0 = b_0 < ... < b_N = M``; the first ``M mod N`` bins get one
    extra record."""
    bounds = np.zeros(N + 1, dtype=np.intp)
    np.cumsum(bin_sizes(M, N), out=bounds[1:])
    return bounds


@dataclass(frozen=True)
class BinPartition:
    permutation: np.ndarray
    boundaries: np.ndarray

    @property
    def N(self) -> int:
        return int(self.boundaries.size - 1)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def bins(self):
        """Record indices of each bin."""
        b = self.boundaries
        return [self.permutation[b[k]:b[k + 1]] for k in range(self.N)]


def partition(d: Dataset, N: int, policy: TiePolicy = TiePolicy(), permutation=None) -> BinPartition:
    perm = order_records(d, policy) if permutation is None else np.asarray(permutation)
    return BinPartition(perm, equal_count_bins(d.size, N))


@dataclass(frozen=True)
class BinStats:
    """Per-bin aggregates, one array entry per bin."""

    n: np.ndarray
    rmv: np.ndarray
    rmse: np.ndarray
    zvar: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray

    def __len__(self):
        return int(self.n.size)

    @property
    def N(self) -> int:
        return len(self)

    def rows(self):
        for k in range(len(self)):
            yield (k + 1, int(self.n[k]), float(self.rmv[k]), float(self.rmse[k]),
                   float(self.zvar[k]), float(self.u_lo[k]), float(self.u_hi[k]))


def _stats_from_sorted(u_sorted, e_sorted, bounds, backend=None) -> BinStats:
    sizes = np.diff(bounds)
    if sizes.min() < 2:
        k = int(np.argmin(sizes))
        raise StatisticsError(f"bin {k + 1} has {sizes[k]} record(s); z-score variance "
                              "needs at least 2")
    rmv, rmse, zvar = kernels.binned_moments(u_sorted, e_sorted, bounds, backend)
    return BinStats(sizes, rmv, rmse, zvar, u_sorted[bounds[:-1]], u_sorted[bounds[1:] - 1])


def bin_stats(d: Dataset, part: BinPartition, backend=None) -> BinStats:
    """RMV, RMSE and sample z-score variance (n-1 denominator) of every bin."""
    if part.permutation.size != d.size or part.boundaries[-1] != d.size:
        raise PartitionError("partition does not match dataset size")
    perm = part.permutation
    return _stats_from_sorted(d.uncertainties[perm], d.errors[perm], part.boundaries, backend)


class OrderedData:
    """A dataset read once through a permutation, reusable for many bin counts."""

    def __init__(self, d: Dataset, permutation):
        self.permutation = np.asarray(permutation)
        self.u = np.ascontiguousarray(d.uncertainties[self.permutation])
        self.e = np.ascontiguousarray(d.errors[self.permutation])

    @property
    def size(self):
        return int(self.u.size)

    def stats(self, N: int, backend=None) -> BinStats:
        return _stats_from_sorted(self.u, self.e, equal_count_bins(self.size, N), backend)
