"""Classical calibrators used as comparison baselines.

Unlike conformal calibration these need machine-labeled data to fit.
Labels are encoded as 1 = machine, 0 = human throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import HUMAN, MACHINE
from .exceptions import FitError, InputError

KINDS = ("max_f1", "platt", "isotonic")


@dataclass(frozen=True)
class CalibratorModel:
    kind: str
    max_f1_threshold: Optional[float] = None
    platt_a: Optional[float] = None
    platt_b: Optional[float] = None
    isotonic_steps: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        present = {
            "max_f1": self.max_f1_threshold is not None,
            "platt": self.platt_a is not None and self.platt_b is not None,
            "isotonic": self.isotonic_steps is not None,
        }
        if self.kind not in KINDS:
            raise InputError(f"unknown calibrator kind {self.kind!r}", code="BAD_MODEL")
        if not present[self.kind] or sum(present.values()) != 1:
            raise InputError(f"{self.kind} model must carry exactly its own parameters",
                             code="BAD_MODEL")
        if self.isotonic_steps is not None:
            xs = [x for x, _ in self.isotonic_steps]
            ps = [p for _, p in self.isotonic_steps]
            if not xs or np.any(np.diff(xs) < 0) or np.any(np.diff(ps) < 0):
                raise InputError("isotonic steps must be non-empty and nondecreasing",
                                 code="BAD_MODEL")


def as_binary(labels) -> np.ndarray:
    """Accept 'human'/'machine' strings or 0/1 and return an int array."""
    out = []
    for lab in labels:
        if lab == MACHINE or (not isinstance(lab, str) and lab == 1):
            out.append(1)
        elif lab == HUMAN or (not isinstance(lab, str) and lab == 0):
            out.append(0)
        else:
            raise InputError(f"unrecognised label {lab!r}", code="BAD_LABEL")
    return np.asarray(out, dtype=np.int64)


def _prepare(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = as_binary(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise InputError("scores and labels must be aligned 1-d sequences")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite", code="NONFINITE_SCORE")
    if y.size == 0 or y.min() == y.max():
        raise FitError("fitting needs at least one human and one machine instance",
                       code="SINGLE_CLASS")
    return s, y


def f1_from_counts(tp, fp, fn):
    tp, fp, fn = (np.asarray(v, dtype=float) for v in (tp, fp, fn))
    denom = 2 * tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), 0.0)


def max_f1_candidates(scores) -> np.ndarray:
    """Midpoints between consecutive distinct scores, bracketed by -inf and +inf."""
    u = np.unique(np.asarray(scores, dtype=float))
    return np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2, [np.inf]])


def f1_curve(scores, labels):
    """F1 (machine positive, predict machine iff score > t) at every candidate t."""
    s, y = np.asarray(scores, dtype=float), as_binary(labels)
    cands = max_f1_candidates(s)
    order = np.argsort(s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # number of instances with score <= t, for each candidate
    below = np.searchsorted(s_sorted, cands, side="right")
    pos_cum = np.concatenate([[0], np.cumsum(y_sorted)])
    n_pos = int(y.sum())
    pos_below = pos_cum[below]
    tp = n_pos - pos_below
    fp = (len(s) - below) - tp
    fn = pos_below
    return cands, f1_from_counts(tp, fp, fn)


def fit_max_f1(scores, labels) -> CalibratorModel:
    s, y = _prepare(scores, labels)
    cands, f1 = f1_curve(s, y)
    best = int(np.flatnonzero(f1 == f1.max())[0])  # smallest threshold among ties
    return CalibratorModel(kind="max_f1", max_f1_threshold=float(cands[best]))


def platt_targets(y: np.ndarray) -> np.ndarray:
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    return np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))


def platt_log_likelihood(a: float, b: float, scores, targets) -> float:
    """Bernoulli log-likelihood of smoothed targets under sigmoid(a*s + b)."""
    z = a * np.asarray(scores, dtype=float) + b
    return float(-np.sum(targets * np.logaddexp(0.0, -z) + (1 - targets) * np.logaddexp(0.0, z)))


def fit_platt(scores, labels, tol: float = 1e-10, max_iter: int = 200) -> CalibratorModel:
    """Newton's method with backtracking on the smoothed-target likelihood."""
    s, y = _prepare(scores, labels)
    t = platt_targets(y)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    a, b = 0.0, float(np.log((n_pos + 1.0) / (n_neg + 1.0)))
    ll = platt_log_likelihood(a, b, s, t)
    for it in range(max_iter):
        z = a * s + b
        p = np.exp(-np.logaddexp(0.0, -z))
        r = t - p
        grad = np.array([np.dot(r, s), r.sum()])
        v = p * (1 - p)
        hess = np.array([[np.dot(v, s * s), np.dot(v, s)],
                         [np.dot(v, s), v.sum()]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(hess, grad)
        lam = 1.0
        while True:
            a_new, b_new = a + lam * step[0], b + lam * step[1]
            ll_new = platt_log_likelihood(a_new, b_new, s, t)
            if ll_new >= ll + 1e-4 * lam * float(grad @ step) or lam < 1e-10:
                break
            lam /= 2
        improvement = ll_new - ll
        if improvement < 0:
            # line search could not improve; current iterate is as good as it gets
            return CalibratorModel(kind="platt", platt_a=float(a), platt_b=float(b))
        a, b, ll = a_new, b_new, ll_new
        if improvement < tol:
            return CalibratorModel(kind="platt", platt_a=float(a), platt_b=float(b))
    raise FitError(f"Platt scaling did not converge in {max_iter} iterations",
                   code="PLATT_NO_CONVERGENCE", a=float(a), b=float(b))


def pava(y, weights=None) -> np.ndarray:
    """Weighted pool-adjacent-violators: the nondecreasing least-squares fit to ``y``.

    Blocks keep integer-friendly (sum, weight) pairs and divide once, so block
    values are exactly ``sum(w*y) / sum(w)`` over their members.
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    sums, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        sums.append(yi * wi)
        wts.append(wi)
        sizes.append(1)
        while len(sums) > 1 and sums[-2] / wts[-2] > sums[-1] / wts[-1]:
            s_last, w_last, n_last = sums.pop(), wts.pop(), sizes.pop()
            sums[-1] += s_last
            wts[-1] += w_last
            sizes[-1] += n_last
    return np.repeat([s / wt for s, wt in zip(sums, wts)], sizes)


def fit_isotonic(scores, labels) -> CalibratorModel:
    """Isotonic regression of the machine indicator on score; tied scores are
    pooled before PAVA so the fit is a function of score."""
    s, y = _prepare(scores, labels)
    xs, inverse = np.unique(s, return_inverse=True)
    counts = np.bincount(inverse).astype(float)
    pos = np.bincount(inverse, weights=y).astype(float)
    fitted = pava(pos / counts, counts)
    steps = tuple((float(x), float(p)) for x, p in zip(xs, fitted))
    return CalibratorModel(kind="isotonic", isotonic_steps=steps)


def predict_proba(model: CalibratorModel, scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if model.kind == "max_f1":
        return (s > model.max_f1_threshold).astype(float)
    if model.kind == "platt":
        z = model.platt_a * s + model.platt_b
        return np.exp(-np.logaddexp(0.0, -z))
    xs = np.array([x for x, _ in model.isotonic_steps])
    ps = np.array([p for _, p in model.isotonic_steps])
    idx = np.clip(np.searchsorted(xs, s, side="right") - 1, 0, len(xs) - 1)
    return ps[idx]


def predict_labels(model: CalibratorModel, scores, cut: float = 0.5) -> np.ndarray:
    """1 = machine. Max-F1 thresholds the score; the others cut the probability."""
    prob = predict_proba(model, scores)
    return (prob > cut).astype(np.int64) if model.kind != "max_f1" else prob.astype(np.int64)


def apply_calibrator(model: CalibratorModel, score: float, cut: float = 0.5):
    prob = float(predict_proba(model, [score])[0])
    machine = bool(predict_labels(model, [score], cut)[0])
    return prob, (MACHINE if machine else HUMAN)


def fit_calibrator(kind: str, scores, labels) -> CalibratorModel:
    fitters = {"max_f1": fit_max_f1, "platt": fit_platt, "isotonic": fit_isotonic}
    if kind not in fitters:
        raise InputError(f"unknown calibrator kind {kind!r}", code="BAD_MODEL")
    return fitters[kind](scores, labels)
