"""Synthetic score corpora with a tunable length-score dependence.

Raw detector scores follow ``Normal(a + b * length, sigma)`` separately for
human and machine text. With ``b_human > 0`` longer human texts look more
machine-like, which is exactly the confound length binning removes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np

from .attacks import edit_count, perturb_raw_scores
from .calibration import CalibrationSet, calibrate_arrays
from .core import HUMAN, MACHINE, DetectorProfile, ScoredInstance, nonconformity_array
from .detection import detect_arrays
from .evaluation import vanilla_roc_point
from .exceptions import ConfigurationError


def default_profile() -> DetectorProfile:
    return DetectorProfile(name="synthetic", k=1, tau=1.0, l_max=1024)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_cal: int = 5000
    n_human: int = 2500
    n_machine: int = 2500
    l_min: int = 10
    l_max: int = 1024
    length_law: str = "uniform"
    # mean length of the long-tail law; lengths are l_min + Geometric(1 / (mean - l_min))
    geometric_mean: float = 300.0
    a_human: float = 0.0
    b_human: float = 0.002
    sigma_human: float = 0.5
    a_machine: float = 2.0
    b_machine: float = 0.0
    sigma_machine: float = 0.5
    profile: DetectorProfile = field(default_factory=default_profile)
    with_text: bool = False
    vocab_size: int = 1000

    def __post_init__(self):
        if self.sigma_human <= 0 or self.sigma_machine <= 0:
            raise ConfigurationError("score spreads must be positive")
        if min(self.n_cal, self.n_human, self.n_machine) < 0:
            raise ConfigurationError("sample counts must be non-negative")
        if self.length_law not in ("uniform", "geometric"):
            raise ConfigurationError(f"unknown length law {self.length_law!r}")
        if not (0 <= self.l_min <= self.l_max):
            raise ConfigurationError("need 0 <= l_min <= l_max")
        if self.length_law == "geometric" and self.geometric_mean <= self.l_min:
            raise ConfigurationError("geometric_mean must exceed l_min")


def trial_seed(seed: int, trial: int) -> int:
    """Independent, individually reproducible 64-bit seed for trial ``trial``."""
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, np.uint64)[0])


def _lengths(cfg: SynthConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    if cfg.length_law == "uniform":
        return rng.integers(cfg.l_min, cfg.l_max + 1, size=n)
    return cfg.l_min - 1 + rng.geometric(1.0 / (cfg.geometric_mean - cfg.l_min + 1), size=n)


def draw_arrays(cfg: SynthConfig):
    """Raw draw as arrays: ``(cal_len, cal_raw, test_len, test_raw, test_is_machine)``.

    Test arrays hold the human block followed by the machine block.
    """
    rng = np.random.default_rng(cfg.seed)
    cal_len = _lengths(cfg, rng, cfg.n_cal)
    cal_raw = rng.normal(cfg.a_human + cfg.b_human * cal_len, cfg.sigma_human)
    h_len = _lengths(cfg, rng, cfg.n_human)
    h_raw = rng.normal(cfg.a_human + cfg.b_human * h_len, cfg.sigma_human)
    m_len = _lengths(cfg, rng, cfg.n_machine)
    m_raw = rng.normal(cfg.a_machine + cfg.b_machine * m_len, cfg.sigma_machine)
    test_len = np.concatenate([h_len, m_len]).astype(np.int64)
    test_raw = np.concatenate([h_raw, m_raw])
    is_machine = np.concatenate([np.zeros(cfg.n_human, bool), np.ones(cfg.n_machine, bool)])
    return cal_len.astype(np.int64), cal_raw, test_len, test_raw, is_machine


def _texts(cfg: SynthConfig, lengths: np.ndarray) -> List[str]:
    rng = np.random.default_rng([cfg.seed, 0x7e57])
    return [" ".join(f"tok{j}" for j in rng.integers(0, cfg.vocab_size, size=n))
            for n in lengths]


def generate(cfg: SynthConfig) -> Tuple[CalibrationSet, List[ScoredInstance], List[ScoredInstance]]:
    """Draw a corpus.

    Returns ``(calibration, test, calibration_records)``: the scored human
    calibration set, the labeled test instances, and the calibration draw as
    records for serialisation.
    """
    cal_len, cal_raw, test_len, test_raw, is_machine = draw_arrays(cfg)
    cal = CalibrationSet(cfg.profile, cal_len, nonconformity_array(cfg.profile, cal_raw))
    cal_texts = _texts(cfg, cal_len) if cfg.with_text else [None] * len(cal_len)
    test_texts = (_texts(replace(cfg, seed=cfg.seed + 1), test_len) if cfg.with_text
                  else [None] * len(test_len))
    cal_records = [ScoredInstance(f"cal-{i:06d}", int(n), float(r), HUMAN, t)
                   for i, (n, r, t) in enumerate(zip(cal_len, cal_raw, cal_texts))]
    test = []
    for i, (n, r, m, t) in enumerate(zip(test_len, test_raw, is_machine, test_texts)):
        prefix, label = ("m", MACHINE) if m else ("h", HUMAN)
        test.append(ScoredInstance(f"{prefix}-{i:06d}", int(n), float(r), label, t))
    return cal, test, cal_records


@dataclass(frozen=True)
class CoverageResult:
    alpha: float
    w: int
    mean_fpr: float
    per_trial_fprs: np.ndarray
    band: float
    violations: int


def fluctuation_band(alpha: float, n_human: int) -> float:
    return alpha + 3.0 * math.sqrt(alpha * (1 - alpha) / n_human)


def _mcp_fpr(cfg: SynthConfig, alpha: float, w: int, merge_sparse: bool) -> float:
    cal_len, cal_raw, test_len, test_raw, is_machine = draw_arrays(
        replace(cfg, n_machine=0))
    table = calibrate_arrays(cal_len, nonconformity_array(cfg.profile, cal_raw), alpha, w,
                             cfg.profile.l_max, merge_sparse)
    flagged, _, _ = detect_arrays(table, nonconformity_array(cfg.profile, test_raw), test_len)
    return float(flagged.mean())


def coverage_trial(cfg: SynthConfig, alpha: float, w: int, trials: int,
                   merge_sparse: bool = False) -> CoverageResult:
    """Repeat draw, calibrate, detect and measure FPR on the human test block.

    Trial ``i`` uses ``trial_seed(cfg.seed, i)``. Machine text plays no role
    in FPR, so it is not drawn.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    fprs = np.array([_mcp_fpr(replace(cfg, seed=trial_seed(cfg.seed, i)), alpha, w, merge_sparse)
                     for i in range(trials)])
    band = fluctuation_band(alpha, cfg.n_human)
    return CoverageResult(alpha=alpha, w=w, mean_fpr=float(fprs.mean()), per_trial_fprs=fprs,
                          band=band, violations=int(np.sum(fprs > band)))


def separation_trial(cfg: SynthConfig, alpha: float, w: int) -> Tuple[float, float]:
    """TPR of binned versus single-quantile calibration on one shared corpus."""
    cal_len, cal_raw, test_len, test_raw, is_machine = draw_arrays(cfg)
    profile = cfg.profile
    cal_s = nonconformity_array(profile, cal_raw)
    test_s = nonconformity_array(profile, test_raw)
    out = []
    for width in (w, profile.l_max):
        table = calibrate_arrays(cal_len, cal_s, alpha, width, profile.l_max)
        flagged, _, _ = detect_arrays(table, test_s, test_len)
        out.append(float(flagged[is_machine].mean()) if is_machine.any() else 0.0)
    return out[0], out[1]


@dataclass(frozen=True)
class AttackTrialResult:
    tpr_vanilla: float
    tpr_vanilla_attacked: float
    tpr_mcp: float
    tpr_mcp_attacked: float


def attack_trial(cfg: SynthConfig, alpha: float, w: int, rate: float,
                 delta: float = -0.02, sigma: float = 0.02) -> AttackTrialResult:
    """Edit-attack every machine text at ``rate`` and compare TPR before and after.

    Attacked raw scores come from :func:`perturb_raw_scores` with one shift per
    edit. Vanilla uses the oracle test-set threshold at FPR ``alpha``; MCP keeps
    the table calibrated on the clean human draw.
    """
    profile = cfg.profile
    cal_len, cal_raw, test_len, test_raw, is_machine = draw_arrays(cfg)
    rng = np.random.default_rng([cfg.seed, 0xA77AC])
    n_edits = np.array([edit_count(int(n), rate) for n in test_len[is_machine]])
    attacked_raw = test_raw.copy()
    attacked_raw[is_machine] = perturb_raw_scores(test_raw[is_machine], n_edits, delta, sigma, rng)

    table = calibrate_arrays(cal_len, nonconformity_array(profile, cal_raw), alpha, w,
                             profile.l_max)
    out = []
    for raw in (test_raw, attacked_raw):
        s = nonconformity_array(profile, raw)
        _, tpr_v, _ = vanilla_roc_point(s[~is_machine], s[is_machine], alpha)
        flagged, _, _ = detect_arrays(table, s, test_len)
        out.append((tpr_v, float(flagged[is_machine].mean())))
    return AttackTrialResult(out[0][0], out[1][0], out[0][1], out[1][1])
