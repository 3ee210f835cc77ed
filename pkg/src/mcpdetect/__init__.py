"""Multiscaled conformal prediction for machine-generated text detection."""

from .baselines import (CalibratorModel, apply_calibrator, fit_isotonic, fit_max_f1,
                        fit_platt, pava)
from .calibration import (BinRecord, CalibrationSet, QuantileTable, bin_index, calibrate,
                          calibrate_cp, calibrate_mcp, cp_quantile)
from .core import (HUMAN, MACHINE, DetectorProfile, ScoredInstance, nonconformity,
                   score_batch)
from .detection import Verdict, detect, detect_batch
from .estimators import (IsotonicCalibrator, MaxF1Threshold, MultiscaleConformalDetector,
                         PlattCalibrator)
from .evaluation import (ALPHA_GRID, ConfusionCounts, SweepReport, confusion, metrics,
                         pearson_length_score, sweep, vanilla_roc_point)
from .exceptions import ConfigurationError, FitError, InputError, MCPError, UsageError

__version__ = "0.1.0"
