"""Conformal quantiles: the single global threshold and the length-binned
(multiscaled) threshold table."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .core import HUMAN, DetectorProfile, ScoredInstance, nonconformity_array
from .exceptions import ConfigurationError, InputError

SENTINEL = 1.0


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise InputError(f"alpha must lie in (0, 1), got {alpha!r}", code="BAD_ALPHA")
    return alpha


def conformal_rank(n: int, alpha: float) -> int:
    """Ceiling rank ``ceil((n + 1)(1 - alpha))``.

    ``alpha`` is taken at its shortest decimal repr so that e.g. 0.3 behaves as
    three tenths rather than its binary neighbour.
    """
    a = Fraction(str(float(alpha)))
    return math.ceil((n + 1) * (1 - a))


def _quantile_of_sorted(sorted_scores: np.ndarray, alpha: float) -> float:
    n = len(sorted_scores)
    if n == 0:
        return SENTINEL
    r = conformal_rank(n, alpha)
    return SENTINEL if r > n else float(sorted_scores[r - 1])


def cp_quantile(scores: Iterable[float], alpha: float) -> float:
    """Split-conformal threshold: the r-th smallest score, or 1.0 if r > n."""
    alpha = _check_alpha(alpha)
    arr = np.sort(np.asarray(list(scores), dtype=float))
    if arr.size == 0:
        raise InputError("cannot take a quantile of an empty sample", code="EMPTY_CALIBRATION")
    return _quantile_of_sorted(arr, alpha)


def bin_index(length: int, w: int, k_bins: int) -> int:
    if length < 0:
        raise InputError(f"length must be non-negative, got {length}", code="BAD_LENGTH")
    return min(int(length) // int(w), int(k_bins) - 1)


def bin_indices(lengths, w: int, k_bins: int) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size and lengths.min() < 0:
        raise InputError("lengths must be non-negative", code="BAD_LENGTH")
    return np.minimum(lengths // int(w), int(k_bins) - 1)


@dataclass(frozen=True)
class BinRecord:
    """Token range ``[lo, hi)``; the last bin also absorbs every length >= lo."""

    lo: int
    hi: int
    n: int
    q: float

    @property
    def is_sentinel(self) -> bool:
        return self.q >= SENTINEL


@dataclass(frozen=True)
class QuantileTable:
    alpha: float
    w: int
    l_max: int
    k_bins: int
    bins: Tuple[BinRecord, ...]

    def __post_init__(self):
        if self.k_bins != self.l_max // self.w or self.k_bins < 1:
            raise ConfigurationError(
                f"k_bins={self.k_bins} inconsistent with l_max={self.l_max}, w={self.w}")
        if len(self.bins) != self.k_bins:
            raise ConfigurationError("bin count does not match k_bins")
        for i, b in enumerate(self.bins):
            if b.lo != i * self.w:
                raise ConfigurationError("bins must be contiguous and ordered")
            if not (0.0 < b.q <= 1.0):
                raise ConfigurationError(f"bin {i} threshold {b.q!r} outside (0, 1]")

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([b.q for b in self.bins])

    @property
    def sentinel_count(self) -> int:
        return sum(b.is_sentinel for b in self.bins)

    def bin_for(self, length: int) -> int:
        return bin_index(length, self.w, self.k_bins)


@dataclass(frozen=True)
class CalibrationSet:
    """Human-written calibration scores paired with their lengths."""

    profile: DetectorProfile
    lengths: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=float)
        if lengths.shape != scores.shape or lengths.ndim != 1:
            raise InputError("lengths and scores must be 1-d and aligned")
        if scores.size and not (np.all(scores > 0.0) and np.all(scores < 1.0)):
            raise InputError("calibration scores must lie strictly inside (0, 1)")
        if lengths.size and lengths.min() < 0:
            raise InputError("lengths must be non-negative", code="BAD_LENGTH")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return int(self.scores.size)

    @property
    def entries(self):
        return list(zip(self.lengths.tolist(), self.scores.tolist()))

    @classmethod
    def from_instances(cls, profile: DetectorProfile, instances: Sequence[ScoredInstance],
                       allow_unlabeled: bool = False) -> "CalibrationSet":
        """Build from records, refusing anything not known to be human."""
        for inst in instances:
            if inst.label is None and not allow_unlabeled:
                raise InputError(f"calibration record {inst.id!r} has no label",
                                 code="CAL_UNLABELED", id=inst.id)
            if inst.label is not None and inst.label != HUMAN:
                raise InputError(f"calibration record {inst.id!r} is labeled {inst.label!r}",
                                 code="CAL_NOT_HUMAN", id=inst.id)
            if inst.raw_score is None:
                raise InputError(f"calibration record {inst.id!r} has no raw_score",
                                 code="MISSING_SCORE", id=inst.id)
        lengths = [inst.length for inst in instances]
        raws = [inst.raw_score for inst in instances]
        scores = nonconformity_array(profile, raws) if raws else np.empty(0)
        return cls(profile, np.asarray(lengths, dtype=np.int64), scores)


def _group_bins(counts: Sequence[int], alpha: float) -> list:
    """Contiguous runs of bins such that no run is too small for its rank,
    whenever pooling with neighbours can achieve that. A sparse bin joins the
    run on its left; a sparse leading run absorbs the bin on its right."""

    def sparse(n):
        return conformal_rank(n, alpha) > n

    groups: list = []
    sizes: list = []
    for i, n in enumerate(counts):
        if groups and (sparse(n) or sparse(sizes[-1])):
            groups[-1].append(i)
            sizes[-1] += n
        else:
            groups.append([i])
            sizes.append(n)
    return groups


def calibrate_arrays(lengths: np.ndarray, scores: np.ndarray, alpha: float, w: int,
                     l_max: int, merge_sparse: bool = False) -> QuantileTable:
    """Array-level worker shared by :func:`calibrate_mcp` and the Monte Carlo harness."""
    alpha = _check_alpha(alpha)
    if scores.size == 0:
        raise InputError("calibration set is empty", code="EMPTY_CALIBRATION")
    if isinstance(w, bool) or int(w) != w or w < 1:
        raise InputError(f"bin width must be a positive integer, got {w!r}", code="BAD_WIDTH")
    w = int(w)
    if w > l_max:
        raise InputError(f"bin width {w} exceeds l_max {l_max}", code="BAD_WIDTH")
    k_bins = l_max // w
    idx = bin_indices(lengths, w, k_bins)
    order = np.lexsort((scores, idx))
    sorted_scores = scores[order]
    bounds = np.searchsorted(idx[order], np.arange(k_bins + 1))
    per_bin = [sorted_scores[bounds[i]:bounds[i + 1]] for i in range(k_bins)]
    counts = [len(s) for s in per_bin]

    if merge_sparse:
        groups = _group_bins(counts, alpha)
    else:
        groups = [[i] for i in range(k_bins)]

    bins = [None] * k_bins
    for group in groups:
        pooled = per_bin[group[0]] if len(group) == 1 else np.sort(
            np.concatenate([per_bin[i] for i in group]))
        q = _quantile_of_sorted(pooled, alpha)
        for i in group:
            hi = l_max if i == k_bins - 1 else (i + 1) * w
            bins[i] = BinRecord(lo=i * w, hi=hi, n=len(pooled), q=q)
    return QuantileTable(alpha=alpha, w=w, l_max=l_max, k_bins=k_bins, bins=tuple(bins))


def calibrate_mcp(cal: CalibrationSet, alpha: float, w: int,
                  merge_sparse: bool = False) -> QuantileTable:
    """Multiscaled quantiles: one conformal threshold per equal-width length bin."""
    return calibrate_arrays(cal.lengths, cal.scores, alpha, w, cal.profile.l_max, merge_sparse)


def calibrate_cp(cal: CalibrationSet, alpha: float) -> QuantileTable:
    """Single global threshold, packaged as a one-bin table."""
    return calibrate_arrays(cal.lengths, cal.scores, alpha, cal.profile.l_max, cal.profile.l_max)


def calibrate(cal: CalibrationSet, alpha: float, w: Optional[int] = None, mode: str = "mcp",
              merge_sparse: bool = False) -> QuantileTable:
    if mode == "cp":
        return calibrate_cp(cal, alpha)
    if mode == "mcp":
        if w is None:
            raise InputError("mcp calibration needs a bin width", code="BAD_WIDTH")
        return calibrate_mcp(cal, alpha, w, merge_sparse=merge_sparse)
    raise InputError(f"unknown calibration mode {mode!r}", code="BAD_MODE")
