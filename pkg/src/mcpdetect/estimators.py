"""scikit-learn compatible wrappers.

``X`` for :class:`MultiscaleConformalDetector` is an ``(n, 2)`` array of
``[length, raw_score]`` rows; the baseline calibrators take 1-d nonconformity
scores. Labels follow the usual 0 = human, 1 = machine convention.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import baselines
from .calibration import CalibrationSet, calibrate
from .core import DetectorProfile, nonconformity_array
from .detection import detect_arrays
from .exceptions import InputError


def _check_length_score(X):
    X = check_array(X, dtype=float, ensure_min_samples=1)
    if X.shape[1] != 2:
        raise InputError(f"expected 2 columns [length, raw_score], got {X.shape[1]}")
    lengths = X[:, 0]
    if np.any(lengths < 0) or np.any(lengths != np.floor(lengths)):
        raise InputError("lengths must be non-negative integers", code="BAD_LENGTH")
    return lengths.astype(np.int64), X[:, 1]


class MultiscaleConformalDetector(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Length-binned conformal detector with false positive rate at most ``alpha``.

    Parameters
    ----------
    alpha : float, default=0.05
        Target upper bound on the false positive rate.
    width : int, default=100
        Bin width in tokens. Ignored when ``mode="cp"``.
    l_max : int, default=1024
        Maximum calibrated length; longer texts use the last bin.
    k : {-1, 1}, default=1
        Polarity of the raw detector score (1 if larger means more machine-like).
    tau : float, default=0.0
        Centre of the nonconformity sigmoid, normally the detector's own threshold.
    mode : {"mcp", "cp"}, default="mcp"
        ``"cp"`` uses a single quantile over all lengths.
    merge_sparse : bool, default=False
        Pool bins too small to support their conformal rank with a neighbour.

    Attributes
    ----------
    table_ : QuantileTable
    profile_ : DetectorProfile
    classes_ : ndarray of shape (2,)
    """

    def __init__(self, alpha=0.05, width=100, l_max=1024, k=1, tau=0.0, mode="mcp",
                 merge_sparse=False):
        self.alpha = alpha
        self.width = width
        self.l_max = l_max
        self.k = k
        self.tau = tau
        self.mode = mode
        self.merge_sparse = merge_sparse

    def fit(self, X, y=None):
        """Calibrate on human-written texts only. If ``y`` is given every label must be 0."""
        lengths, raw = _check_length_score(X)
        if y is not None:
            y = np.asarray(y)
            if y.shape[0] != lengths.shape[0]:
                raise InputError("X and y have different lengths")
            if np.any(y != 0):
                raise InputError("calibration data must be human-written (label 0)",
                                 code="CAL_NOT_HUMAN")
        self.profile_ = DetectorProfile(name="estimator", k=self.k, tau=self.tau,
                                        l_max=self.l_max)
        cal = CalibrationSet(self.profile_, lengths, nonconformity_array(self.profile_, raw))
        self.table_ = calibrate(cal, self.alpha, w=self.width, mode=self.mode,
                                merge_sparse=self.merge_sparse)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        """Nonconformity scores of the raw detector outputs."""
        check_is_fitted(self, "table_")
        _, raw = _check_length_score(X)
        return nonconformity_array(self.profile_, raw)

    def decision_function(self, X):
        """Score minus the threshold of its length bin; positive means machine."""
        check_is_fitted(self, "table_")
        lengths, raw = _check_length_score(X)
        s = nonconformity_array(self.profile_, raw)
        _, _, thresholds = detect_arrays(self.table_, s, lengths)
        return s - thresholds

    def predict(self, X):
        check_is_fitted(self, "table_")
        lengths, raw = _check_length_score(X)
        flagged, _, _ = detect_arrays(self.table_, nonconformity_array(self.profile_, raw),
                                      lengths)
        return flagged.astype(np.int64)


class _BaselineCalibrator(ClassifierMixin, BaseEstimator):
    _kind = None

    def __init__(self, cut=0.5):
        self.cut = cut

    def _scores(self, X):
        X = check_array(np.asarray(X, dtype=float).reshape(-1, 1) if np.ndim(X) == 1 else X,
                        dtype=float)
        if X.shape[1] != 1:
            raise InputError("baseline calibrators take a single score column")
        return X[:, 0]

    def fit(self, X, y):
        self.model_ = baselines.fit_calibrator(self._kind, self._scores(X), y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 1
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = baselines.predict_proba(self.model_, self._scores(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        check_is_fitted(self, "model_")
        return baselines.predict_labels(self.model_, self._scores(X), self.cut)


class MaxF1Threshold(_BaselineCalibrator):
    """Single score threshold chosen to maximise F1 on labeled data."""

    _kind = "max_f1"


class PlattCalibrator(_BaselineCalibrator):
    """Logistic recalibration of scores (Platt scaling with smoothed targets)."""

    _kind = "platt"


class IsotonicCalibrator(_BaselineCalibrator):
    """Monotone step-function recalibration fitted by pool-adjacent-violators."""

    _kind = "isotonic"
