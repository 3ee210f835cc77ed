"""Detection metrics, oracle ROC operating points and alpha sweeps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .baselines import CalibratorModel, as_binary, predict_labels
from .calibration import CalibrationSet, calibrate_cp, calibrate_mcp
from .core import MACHINE, ScoredInstance, nonconformity_array
from .detection import Verdict, detect_arrays
from .exceptions import InputError

ALPHA_GRID = (0.2, 0.1, 0.05, 0.02, 0.01, 0.005)
MODES = ("vanilla_roc", "cp", "mcp", "baseline")


@dataclass(frozen=True)
class ConfusionCounts:
    """Machine is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Metrics:
    fpr: float
    tpr: float
    precision: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def _predicted_label(v):
    if isinstance(v, Verdict):
        return v.label_out
    return v


def confusion(predicted: Sequence, truth: Sequence) -> ConfusionCounts:
    """Count outcomes for position-aligned predictions and truth.

    ``predicted`` holds verdicts or labels; labels may be strings or 0/1.
    Use :func:`align_by_id` first when the two sides are keyed by id.
    """
    if len(predicted) != len(truth):
        raise InputError(f"{len(predicted)} predictions but {len(truth)} truth labels",
                         code="LENGTH_MISMATCH")
    p = as_binary([_predicted_label(v) for v in predicted])
    t = as_binary(truth)
    return counts_from_arrays(p, t)


def counts_from_arrays(pred_machine, is_machine) -> ConfusionCounts:
    p = np.asarray(pred_machine, dtype=bool)
    t = np.asarray(is_machine, dtype=bool)
    return ConfusionCounts(tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)),
                           tn=int(np.sum(~p & ~t)), fn=int(np.sum(~p & t)))


def align_by_id(verdicts: Sequence[Verdict], truth: Mapping[str, str]):
    """Return ``(predicted_labels, truth_labels)`` joined on instance id."""
    if len(verdicts) != len(truth):
        raise InputError(f"{len(verdicts)} verdicts but {len(truth)} labeled records",
                         code="LENGTH_MISMATCH")
    missing = [v.id for v in verdicts if v.id not in truth]
    if missing:
        raise InputError(f"no truth label for id {missing[0]!r}", code="ID_MISMATCH",
                         id=missing[0])
    return [v.label_out for v in verdicts], [truth[v.id] for v in verdicts]


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def metrics(c: ConfusionCounts) -> Metrics:
    """FPR, TPR, precision and F1; any 0/0 is reported as 0."""
    tpr = _ratio(c.tp, c.tp + c.fn)
    precision = _ratio(c.tp, c.tp + c.fp)
    return Metrics(fpr=_ratio(c.fp, c.fp + c.tn), tpr=tpr, precision=precision,
                   f1=_ratio(2 * precision * tpr, precision + tpr))


def vanilla_roc_point(scores_h: Sequence[float], scores_m: Sequence[float], target_fpr: float):
    """Oracle operating point chosen on the test human scores.

    Returns ``(threshold, tpr, f1)`` where threshold is the smallest value with
    at most ``target_fpr`` of human scores strictly above it (-inf when every
    human may be flagged).
    """
    h = np.sort(np.asarray(scores_h, dtype=float))
    m = np.asarray(scores_m, dtype=float)
    if h.size == 0 or m.size == 0:
        raise InputError("vanilla ROC point needs human and machine scores", code="EMPTY_INPUT")
    allowed = math.floor(target_fpr * h.size + 1e-9)
    threshold = -math.inf if allowed >= h.size else float(h[h.size - allowed - 1])
    c = ConfusionCounts(tp=int(np.sum(m > threshold)), fp=int(np.sum(h > threshold)),
                        tn=int(np.sum(h <= threshold)), fn=int(np.sum(m <= threshold)))
    mt = metrics(c)
    return threshold, mt.tpr, mt.f1


@dataclass(frozen=True)
class SweepRow:
    mode: str
    alpha: float
    fpr: float
    tpr: float
    f1: float
    method: Optional[str] = None

    def to_dict(self) -> dict:
        return {"mode": self.mode, "method": self.method, "alpha": self.alpha,
                "fpr": self.fpr, "tpr": self.tpr, "f1": self.f1}


@dataclass(frozen=True)
class SweepReport:
    rows: tuple

    def by_mode(self, mode: str) -> List[SweepRow]:
        return [r for r in self.rows if r.mode == mode]

    def to_records(self) -> List[dict]:
        return [r.to_dict() for r in self.rows]


def _test_arrays(cal: CalibrationSet, test: Sequence[ScoredInstance]):
    for inst in test:
        if inst.label is None:
            raise InputError(f"test record {inst.id!r} has no label", code="TEST_UNLABELED",
                             id=inst.id)
        if inst.raw_score is None:
            raise InputError(f"test record {inst.id!r} has no raw_score",
                             code="MISSING_SCORE", id=inst.id)
    scores = nonconformity_array(cal.profile, [i.raw_score for i in test])
    lengths = np.array([i.length for i in test], dtype=np.int64)
    is_machine = np.array([i.label == MACHINE for i in test], dtype=bool)
    return scores, lengths, is_machine


def sweep(cal: CalibrationSet, test: Sequence[ScoredInstance],
          alphas: Iterable[float] = ALPHA_GRID, w: int = 100,
          modes: Sequence[str] = ("vanilla_roc", "cp", "mcp"),
          baselines: Optional[Mapping[str, CalibratorModel]] = None,
          cut: float = 0.5, merge_sparse: bool = False) -> SweepReport:
    """Recalibrate at every alpha and score the test set.

    Rows come out grouped by mode in the order given, then by alpha in the
    order given. Baseline rows do not depend on alpha but are repeated per
    alpha so every mode has the same shape.
    """
    alphas = list(alphas)
    unknown = set(modes) - set(MODES)
    if unknown:
        raise InputError(f"unknown sweep modes {sorted(unknown)}", code="BAD_MODE")
    scores, lengths, is_machine = _test_arrays(cal, test)
    rows = []
    for mode in modes:
        if mode == "baseline":
            for name, model in (baselines or {}).items():
                pred = predict_labels(model, scores, cut).astype(bool)
                mt = metrics(counts_from_arrays(pred, is_machine))
                rows += [SweepRow("baseline", a, mt.fpr, mt.tpr, mt.f1, method=name)
                         for a in alphas]
            continue
        for a in alphas:
            if mode == "vanilla_roc":
                threshold, _, _ = vanilla_roc_point(scores[~is_machine], scores[is_machine], a)
                pred = scores > threshold
            else:
                table = calibrate_cp(cal, a) if mode == "cp" else calibrate_mcp(
                    cal, a, w, merge_sparse=merge_sparse)
                pred, _, _ = detect_arrays(table, scores, lengths)
            mt = metrics(counts_from_arrays(pred, is_machine))
            rows.append(SweepRow(mode, a, mt.fpr, mt.tpr, mt.f1))
    return SweepReport(tuple(rows))


def pearson_length_score(entries: Sequence) -> float:
    """Sample Pearson correlation between length and score."""
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] != 2:
        raise InputError("need at least two (length, score) pairs", code="TOO_FEW_POINTS")
    x, y = arr[:, 0] - arr[:, 0].mean(), arr[:, 1] - arr[:, 1].mean()
    sxx, syy = float(x @ x), float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise InputError("correlation undefined: zero variance", code="ZERO_VARIANCE")
    return float(np.clip((x @ y) / math.sqrt(sxx * syy), -1.0, 1.0))
