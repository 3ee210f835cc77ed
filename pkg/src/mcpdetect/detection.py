"""Classification against a calibrated quantile table."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .calibration import QuantileTable, bin_indices
from .core import HUMAN, MACHINE, DetectorProfile, ScoredInstance, nonconformity_array
from .exceptions import ConfigurationError, InputError


@dataclass(frozen=True)
class Verdict:
    """Detection outcome with the bin and threshold that produced it."""

    id: str
    bin: int
    score: float
    threshold: float
    label_out: str

    def to_dict(self) -> dict:
        return {"id": self.id, "bin": self.bin, "score": self.score,
                "threshold": self.threshold, "label_out": self.label_out}


def _check_pair(table: QuantileTable, profile: DetectorProfile):
    if table.l_max != profile.l_max:
        raise ConfigurationError(
            f"table l_max={table.l_max} does not match profile l_max={profile.l_max}",
            code="LMAX_MISMATCH")


def detect_arrays(table: QuantileTable, scores: np.ndarray, lengths: np.ndarray):
    """Return ``(is_machine, bins, thresholds)`` for precomputed nonconformity scores."""
    bins = bin_indices(lengths, table.w, table.k_bins)
    thresholds = table.thresholds[bins]
    return np.asarray(scores) > thresholds, bins, thresholds


def detect(table: QuantileTable, profile: DetectorProfile, instance: ScoredInstance) -> Verdict:
    return detect_batch(table, profile, [instance])[0]


def _detect_chunk(table, profile, chunk) -> List[Verdict]:
    raws = []
    for inst in chunk:
        if inst.raw_score is None:
            raise InputError(f"instance {inst.id!r}: missing raw_score",
                             code="MISSING_SCORE", id=inst.id)
        raws.append(inst.raw_score)
    scores = nonconformity_array(profile, raws)
    lengths = np.array([inst.length for inst in chunk], dtype=np.int64)
    flags, bins, thresholds = detect_arrays(table, scores, lengths)
    return [
        Verdict(inst.id, int(b), float(s), float(q), MACHINE if f else HUMAN)
        for inst, s, b, q, f in zip(chunk, scores, bins, thresholds, flags)
    ]


def detect_batch(table: QuantileTable, profile: DetectorProfile,
                 instances: Sequence[ScoredInstance], n_jobs: int = 1,
                 chunk_size: int = 1024) -> List[Verdict]:
    """Order-preserving batch detection; ``n_jobs > 1`` splits the work into
    chunks evaluated on a thread pool, with results reassembled in input order."""
    _check_pair(table, profile)
    instances = list(instances)
    if not instances:
        return []
    chunks = [instances[i:i + chunk_size] for i in range(0, len(instances), chunk_size)]
    if n_jobs == 1 or len(chunks) == 1:
        parts = [_detect_chunk(table, profile, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda c: _detect_chunk(table, profile, c), chunks))
    return [v for part in parts for v in part]
