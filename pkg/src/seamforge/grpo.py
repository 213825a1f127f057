"""Group-relative policy optimization: advantages, PPO clip, KL anchoring.

One *group* is the K candidate entries sampled for a single problem instance.
Rewards are normalized within the group (population standard deviation,
divisor K, stabilized by a small delta), the clipped importance-ratio
surrogate is maximized, and a nonnegative KL estimator anchors the trainable
policy to a frozen reference:

    A_j  = (R_j - mean(R)) / (std(R) + delta)
    rho  = exp(logp_new - logp_old)
    surr = mean_t min(rho_t A_j, clip(rho_t, 1-eps, 1+eps) A_j)
    kl   = mean_t (exp(r_t) - r_t - 1),   r_t = logp_ref_t - logp_new_t
    loss = -(1/K) sum_j surr_j + beta (1/K) sum_j kl_j

Gradients flow only through ``logp_new``; the sampled (old) and reference
log-probabilities are constants.  Ratios are per-token by default; a
sequence-level mode multiplies them into one ratio per candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_CLIP_EPS = 0.2
DEFAULT_KL_BETA = 0.001
DEFAULT_STD_DELTA = 1e-4

RATIO_LEVEL_TOKEN = "token"
RATIO_LEVEL_SEQUENCE = "sequence"
RATIO_LEVELS = (RATIO_LEVEL_TOKEN, RATIO_LEVEL_SEQUENCE)


@dataclass(frozen=True)
class AdvantageVector:
    """Group-normalized advantages plus the statistics that produced them."""

    values: np.ndarray
    group_mean: float
    group_std: float
    delta: float


@dataclass(frozen=True)
class GroupBatch:
    """One instance's K candidates: aligned per-token log-probs under each role."""

    advantages: AdvantageVector
    logp_new: tuple[np.ndarray, ...]
    logp_old: tuple[np.ndarray, ...]
    logp_ref: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        k = len(self.advantages.values)
        if not len(self.logp_new) == len(self.logp_old) == len(self.logp_ref) == k:
            raise ValueError("log-prob lists must have one array per candidate")
        for j in range(k):
            if not (
                self.logp_new[j].shape
                == self.logp_old[j].shape
                == self.logp_ref[j].shape
            ):
                raise ValueError(f"candidate {j}: per-role log-probs are misaligned")
            if self.logp_new[j].size == 0:
                raise ValueError(f"candidate {j} has no tokens")


@dataclass(frozen=True)
class GrpoLossStats:
    loss: float
    surrogate_term: float
    kl_term: float
    clip_fraction: float
    mean_ratio: float


def compute_advantages(
    rewards: Sequence[float] | np.ndarray, delta: float = DEFAULT_STD_DELTA
) -> AdvantageVector:
    """Normalize a group's mean rewards into advantages.

    Uses the population standard deviation (divisor K).  Degenerate groups
    (zero variance) are kept and normalize to all-zero advantages.
    """
    values = np.asarray(rewards, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("rewards must be a flat vector")
    if len(values) < 2:
        raise ValueError(f"a group needs at least 2 candidates, got {len(values)}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    mean = float(values.mean())
    std = float(np.sqrt(((values - mean) ** 2).mean()))
    return AdvantageVector(
        values=(values - mean) / (std + delta),
        group_mean=mean,
        group_std=std,
        delta=delta,
    )


def importance_ratio(logp_new: np.ndarray, logp_old: np.ndarray) -> np.ndarray:
    """Per-token probability ratios exp(logp_new - logp_old)."""
    new = np.asarray(logp_new, dtype=np.float64)
    old = np.asarray(logp_old, dtype=np.float64)
    if new.shape != old.shape:
        raise ValueError("log-prob arrays must align token-for-token")
    return np.exp(new - old)


def clipped_surrogate(
    ratios: np.ndarray, advantage: float, clip_eps: float = DEFAULT_CLIP_EPS
) -> float:
    """Mean over tokens of min(rho*A, clip(rho, 1-eps, 1+eps)*A)."""
    ratios = np.asarray(ratios, dtype=np.float64)
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    return float(np.minimum(ratios * advantage, clipped * advantage).mean())


def kl_penalty(logp_new: np.ndarray, logp_ref: np.ndarray) -> float:
    """Nonnegative sampled KL estimate, averaged over the candidate's tokens."""
    r = np.asarray(logp_ref, dtype=np.float64) - np.asarray(logp_new, dtype=np.float64)
    return float(np.mean(np.exp(r) - r - 1.0))


def _surrogate_terms(
    logp_new: np.ndarray,
    logp_old: np.ndarray,
    advantage: float,
    clip_eps: float,
    ratio_level: str,
) -> tuple[float, np.ndarray, int, int, float]:
    """One candidate's surrogate, its d/dlogp_new, clip count, position count, ratio sum."""
    ratios = importance_ratio(logp_new, logp_old)
    lo, hi = 1.0 - clip_eps, 1.0 + clip_eps
    if ratio_level == RATIO_LEVEL_TOKEN:
        clipped = np.clip(ratios, lo, hi)
        raw = ratios * advantage
        capped = clipped * advantage
        per_token = np.minimum(raw, capped)
        # The clipped branch is active exactly where it wins the min strictly;
        # there the gradient through rho vanishes.
        active = raw > capped
        surrogate = float(per_token.mean())
        grad = np.where(active, 0.0, advantage * ratios) / len(ratios)
        return surrogate, grad, int(active.sum()), len(ratios), float(ratios.sum())
    if ratio_level == RATIO_LEVEL_SEQUENCE:
        rho = float(np.exp(np.sum(logp_new - logp_old)))
        capped = min(max(rho, lo), hi) * advantage
        raw = rho * advantage
        surrogate = min(raw, capped)
        active = raw > capped
        grad = np.zeros_like(ratios) if active else np.full_like(ratios, advantage * rho)
        return surrogate, grad, int(active), 1, rho
    raise ValueError(f"unknown ratio level {ratio_level!r}; expected one of {RATIO_LEVELS}")


def _kl_terms(logp_new: np.ndarray, logp_ref: np.ndarray) -> tuple[float, np.ndarray]:
    """One candidate's sampled KL estimate and its d/dlogp_new."""
    r = logp_ref - logp_new
    expr = np.exp(r)
    kl = float(np.mean(expr - r - 1.0))
    grad = (1.0 - expr) / len(r)
    return kl, grad


def exact_kl_terms(
    logdist_new: np.ndarray, logdist_ref: np.ndarray
) -> tuple[float, np.ndarray]:
    """Vocabulary-sum KL(new ‖ ref) averaged over positions, with d/dlogits_new.

    Both arguments are (T, V) log-distributions.  The returned gradient is
    with respect to the logits that produced ``logdist_new`` (softmax inputs),
    using d KL(p(z) ‖ q)/dz_i = p_i (log(p_i/q_i) - KL).
    """
    if logdist_new.shape != logdist_ref.shape or logdist_new.ndim != 2:
        raise ValueError("log-distributions must be (T, V) and aligned")
    p = np.exp(logdist_new)
    logratio = logdist_new - logdist_ref
    contrib = np.where(p > 0.0, p * logratio, 0.0)
    kl_per_position = contrib.sum(axis=1)
    positions = len(kl_per_position)
    kl = float(kl_per_position.mean())
    dlogits = p * (logratio - kl_per_position[:, None]) / positions
    return kl, dlogits


def _assemble(
    group: GroupBatch,
    clip_eps: float,
    beta: float,
    ratio_level: str,
    kl_values: Sequence[float] | None,
    want_grads: bool,
) -> tuple[GrpoLossStats, list[np.ndarray] | None]:
    k = len(group.advantages.values)
    surrogates: list[float] = []
    kls: list[float] = []
    grads: list[np.ndarray] | None = [] if want_grads else None
    clip_count = 0
    position_count = 0
    ratio_sum = 0.0
    for j in range(k):
        advantage = float(group.advantages.values[j])
        surr, dsurr, clipped, positions, ratios = _surrogate_terms(
            group.logp_new[j], group.logp_old[j], advantage, clip_eps, ratio_level
        )
        surrogates.append(surr)
        clip_count += clipped
        position_count += positions
        ratio_sum += ratios
        if kl_values is not None:
            kl = float(kl_values[j])
            dkl = None  # caller owns the exact-KL gradient (needs full distributions)
        else:
            kl, dkl = _kl_terms(group.logp_new[j], group.logp_ref[j])
        kls.append(kl)
        if grads is not None:
            total = -dsurr / k
            if dkl is not None:
                total = total + (beta / k) * dkl
            grads.append(total)
    surrogate_term = float(np.mean(surrogates))
    kl_term = float(np.mean(kls))
    stats = GrpoLossStats(
        loss=-surrogate_term + beta * kl_term,
        surrogate_term=surrogate_term,
        kl_term=kl_term,
        clip_fraction=clip_count / position_count,
        mean_ratio=ratio_sum / position_count,
    )
    return stats, grads


def grpo_loss(
    group: GroupBatch,
    clip_eps: float = DEFAULT_CLIP_EPS,
    beta: float = DEFAULT_KL_BETA,
    ratio_level: str = RATIO_LEVEL_TOKEN,
    kl_values: Sequence[float] | None = None,
) -> GrpoLossStats:
    """Loss and diagnostics for one group.

    ``kl_values`` substitutes externally computed per-candidate KL terms (the
    exact vocabulary-sum mode); otherwise the sampled estimator runs on the
    group's own log-probs.
    """
    stats, _ = _assemble(group, clip_eps, beta, ratio_level, kl_values, want_grads=False)
    return stats


def grpo_loss_grads(
    group: GroupBatch,
    clip_eps: float = DEFAULT_CLIP_EPS,
    beta: float = DEFAULT_KL_BETA,
    ratio_level: str = RATIO_LEVEL_TOKEN,
    kl_values: Sequence[float] | None = None,
) -> tuple[GrpoLossStats, list[np.ndarray]]:
    """Loss stats plus d loss / d logp_new per candidate.

    With ``kl_values`` supplied the returned gradients cover only the
    surrogate term; the exact-KL gradient lives in logits space and must be
    injected by the caller (see ``exact_kl_terms``).
    """
    stats, grads = _assemble(group, clip_eps, beta, ratio_level, kl_values, want_grads=True)
    assert grads is not None
    return stats, grads
