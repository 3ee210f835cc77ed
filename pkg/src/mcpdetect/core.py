"""Shared data model and the nonconformity transform."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError, InputError

HUMAN = "human"
MACHINE = "machine"
LABELS = (HUMAN, MACHINE)

# Scores are kept strictly inside (0, 1) so that a threshold of exactly 1.0
# can never be exceeded.
SCORE_EPS = 1e-12


@dataclass(frozen=True)
class DetectorProfile:
    """Per-detector configuration: polarity ``k``, default threshold ``tau``
    and the maximum calibrated length ``l_max`` (in tokens)."""

    name: str
    k: int
    tau: float
    l_max: int

    def __post_init__(self):
        if self.k not in (-1, 1) or isinstance(self.k, bool):
            raise ConfigurationError(f"k must be -1 or +1, got {self.k!r}")
        if not math.isfinite(self.tau):
            raise ConfigurationError(f"tau must be finite, got {self.tau!r}")
        if int(self.l_max) != self.l_max or self.l_max < 1:
            raise ConfigurationError(f"l_max must be a positive integer, got {self.l_max!r}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "l_max", int(self.l_max))

    def to_dict(self) -> dict:
        return {"name": self.name, "k": self.k, "tau": self.tau, "l_max": self.l_max}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DetectorProfile":
        try:
            return cls(name=str(d["name"]), k=d["k"], tau=float(d["tau"]), l_max=d["l_max"])
        except KeyError as exc:
            raise ConfigurationError(f"detector profile missing field {exc}") from None


@dataclass(frozen=True)
class ScoredInstance:
    """One text's record.

    ``raw_score`` may be ``None`` only for records that have not been scored
    yet (e.g. freshly attacked text); every scoring operation rejects it.
    Unknown JSONL fields ride along in ``extra``.
    """

    id: str
    length: int
    raw_score: Optional[float] = None
    label: Optional[str] = None
    text: Optional[str] = None
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if isinstance(self.length, bool) or int(self.length) != self.length or self.length < 0:
            raise InputError(f"instance {self.id!r}: length must be a non-negative integer",
                             code="BAD_LENGTH", id=self.id)
        object.__setattr__(self, "length", int(self.length))
        if self.raw_score is not None:
            raw = float(self.raw_score)
            if not math.isfinite(raw):
                raise InputError(f"instance {self.id!r}: raw_score must be finite",
                                 code="NONFINITE_SCORE", id=self.id)
            object.__setattr__(self, "raw_score", raw)
        if self.label is not None and self.label not in LABELS:
            raise InputError(f"instance {self.id!r}: label must be 'human' or 'machine'",
                             code="BAD_LABEL", id=self.id)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def nonconformity_array(profile: DetectorProfile, raw) -> np.ndarray:
    """Vectorised nonconformity transform; larger means less human-like."""
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise InputError("raw scores must be finite", code="NONFINITE_SCORE")
    with np.errstate(over="ignore"):
        z = profile.k * (raw - profile.tau)
    return np.clip(_sigmoid(np.atleast_1d(z)), SCORE_EPS, 1.0 - SCORE_EPS).reshape(raw.shape)


def nonconformity(profile: DetectorProfile, raw_score: float) -> float:
    """Map one raw detector output to a nonconformity score in (0, 1)."""
    if raw_score is None or not math.isfinite(raw_score):
        raise InputError(f"raw score must be finite, got {raw_score!r}", code="NONFINITE_SCORE")
    return float(nonconformity_array(profile, [raw_score])[0])


def score_batch(profile: DetectorProfile, instances: Sequence[ScoredInstance]):
    """Return ``[(id, length, score), ...]`` in input order."""
    raws = []
    for inst in instances:
        if inst.raw_score is None:
            raise InputError(f"instance {inst.id!r}: missing raw_score",
                             code="MISSING_SCORE", id=inst.id)
        raws.append(inst.raw_score)
    scores = nonconformity_array(profile, raws) if raws else np.empty(0)
    return [(inst.id, inst.length, float(s)) for inst, s in zip(instances, scores)]
