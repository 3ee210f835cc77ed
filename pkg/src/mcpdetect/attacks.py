"""Random token-level edit attacks (insertion, deletion, substitution)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .exceptions import InputError

KINDS = ("insert", "delete", "substitute")
EDIT_RATES = (0.01, 0.03, 0.05)


@dataclass(frozen=True)
class EditAttackSpec:
    kind: str
    rate: float
    vocabulary: Sequence[str] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown attack kind {self.kind!r}", code="BAD_ATTACK")
        if not (0.0 < self.rate < 1.0):
            raise InputError(f"attack rate must lie in (0, 1), got {self.rate!r}",
                             code="BAD_ATTACK")
        if self.kind != "delete" and len(self.vocabulary) == 0:
            raise InputError(f"{self.kind} needs a non-empty vocabulary", code="BAD_ATTACK")
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))


def tokenize_ws(text: str) -> List[str]:
    return text.split()


def detokenize_ws(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def edit_count(n: int, rate: float) -> int:
    """``max(1, floor(rate * n))``; the 1e-9 guards products like 0.03 * 100."""
    return max(1, math.floor(rate * n + 1e-9))


def apply_edit_attack(tokens: Sequence[str], spec: EditAttackSpec) -> List[str]:
    tokens = list(tokens)
    n = len(tokens)
    if n == 0 and spec.kind != "insert":
        raise InputError(f"cannot {spec.kind} tokens of an empty sequence", code="EMPTY_TEXT")
    rng = np.random.default_rng(spec.seed)
    m = edit_count(n, spec.rate)
    vocab = spec.vocabulary

    if spec.kind == "substitute":
        positions = rng.choice(n, size=min(m, n), replace=False)
        for pos, tok in zip(positions, rng.integers(0, len(vocab), size=len(positions))):
            tokens[pos] = vocab[tok]
        return tokens

    if spec.kind == "delete":
        m = min(m, n - 1)
        drop = set(rng.choice(n, size=m, replace=False).tolist())
        return [t for i, t in enumerate(tokens) if i not in drop]

    # gap indices 0..n; each chosen gap receives one new token
    gaps = np.sort(rng.choice(n + 1, size=min(m, n + 1), replace=False))
    new = [vocab[j] for j in rng.integers(0, len(vocab), size=len(gaps))]
    out: List[str] = []
    g = 0
    for i in range(n + 1):
        while g < len(gaps) and gaps[g] == i:
            out.append(new[g])
            g += 1
        if i < n:
            out.append(tokens[i])
    return out


def attack_text(text: str, spec: EditAttackSpec) -> str:
    return detokenize_ws(apply_edit_attack(tokenize_ws(text), spec))


def perturb_raw_scores(raw, n_edits, delta: float, sigma: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Score model for edited text: every edit adds an independent
    ``Normal(delta, sigma)`` shift to the raw detector score."""
    raw = np.asarray(raw, dtype=float)
    n_edits = np.broadcast_to(np.asarray(n_edits, dtype=float), raw.shape)
    return raw + rng.normal(n_edits * delta, sigma * np.sqrt(n_edits))
