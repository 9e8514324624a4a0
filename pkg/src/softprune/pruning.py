"""Score tracking and epoch planning for loss-guided soft pruning.

The planner keeps one scalar score per sample (its last observed training
loss, initialized to 1), prunes below-mean samples with probability ``r``
during the pruning window, and compensates the survivors by scaling their
loss weight to ``1/(1-r)`` so the expected total update is unchanged.
Planning touches each score once: the threshold is a mean and the optional
tier boundary is a selection, never a full sort.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataCorruptionError, InvalidArgumentError, OutOfRangeError

log = logging.getLogger(__name__)

# A single divergent loss must not poison the mean threshold permanently.
SCORE_CLAMP_MAX = 1e6

KINDS = ("info_batch", "static_hard", "dynamic_random", "none")
RESCALE_MODES = ("per_sample", "global")


def _philox(seed: int, epoch: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, epoch).

    Philox is deterministic across platforms and the i-th variate of a
    vectorized draw is a pure function of (key, i), so per-sample draws do
    not depend on evaluation order.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(epoch)])
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class ScoreTable:
    """Per-sample scores plus the epoch counter.

    The length is fixed at construction; scores stay finite and >= 0.
    """

    scores: np.ndarray
    epoch: int = 0

    @property
    def size(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class TierSpec:
    """Extra prune pressure on the lowest-score band.

    ``r_aggressive`` applies to prune-eligible samples whose score falls at
    or below the ``quantile`` cut of all current scores.
    """

    quantile: float
    r_aggressive: float


@dataclass(frozen=True)
class PrunePolicy:
    kind: str = "info_batch"
    r: float = 0.5
    delta: float = 0.875
    total_epochs: int = 1
    rescale_mode: str = "per_sample"
    tier: Optional[TierSpec] = None
    keep_prob: float = 1.0       # dynamic_random only
    keep_fraction: float = 1.0   # static_hard only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown policy kind {self.kind!r}")
        if self.rescale_mode not in RESCALE_MODES:
            raise InvalidArgumentError(f"unknown rescale_mode {self.rescale_mode!r}")
        if self.total_epochs < 1:
            raise InvalidArgumentError("total_epochs must be >= 1")
        if self.kind == "info_batch":
            if not 0.0 <= self.r < 1.0:
                raise InvalidArgumentError("r must be in [0, 1)")
            if not 0.0 < self.delta < 1.0:
                raise InvalidArgumentError("delta must be in (0, 1)")
            if self.tier is not None:
                if not 0.0 < self.tier.quantile < 1.0:
                    raise InvalidArgumentError("tier quantile must be in (0, 1)")
                if not self.r <= self.tier.r_aggressive < 1.0:
                    raise InvalidArgumentError(
                        "tier r_aggressive must be in [r, 1): the tier is the more aggressive rate"
                    )
        elif self.kind == "dynamic_random":
            if not 0.0 < self.keep_prob <= 1.0:
                raise InvalidArgumentError("keep_prob must be in (0, 1]")
        elif self.kind == "static_hard":
            if not 0.0 < self.keep_fraction <= 1.0:
                raise InvalidArgumentError("keep_fraction must be in (0, 1]")


@dataclass
class EpochPlan:
    """One epoch's keep decision: kept ids (strictly increasing), their loss
    weights, the realized threshold, and the kept ratio."""

    kept_ids: np.ndarray
    weights: np.ndarray
    threshold: float
    kept_ratio: float
    epoch: int


def new_score_table(n: int) -> ScoreTable:
    """Fresh table of ``n`` unit scores at epoch 0."""
    if n < 1:
        raise InvalidArgumentError("score table needs at least one sample")
    return ScoreTable(scores=np.ones(n, dtype=np.float64), epoch=0)


def mean_threshold(table: ScoreTable) -> float:
    """Arithmetic mean of all scores (the prune-eligibility threshold).

    numpy's pairwise summation keeps the relative error well below 1e-12
    even at 1e7 entries.
    """
    scores = table.scores if isinstance(table, ScoreTable) else np.asarray(table)
    if scores.size == 0:
        raise InvalidArgumentError("empty score table")
    if not np.isfinite(scores).all():
        raise DataCorruptionError("non-finite score encountered while computing the threshold")
    return float(np.mean(scores))


def quantile(scores: np.ndarray, q: float) -> float:
    """Nearest-rank quantile via selection (expected linear, never a sort).

    Returns an element v of ``scores`` such that at least ceil(q*N) entries
    are <= v; q=0 gives the minimum.
    """
    a = np.asarray(scores, dtype=np.float64)
    if a.size == 0:
        raise InvalidArgumentError("quantile of an empty vector")
    if not np.isfinite(a).all():
        raise DataCorruptionError("non-finite score in quantile input")
    if not 0.0 <= q <= 1.0:
        raise InvalidArgumentError("q must be in [0, 1]")
    rank = max(1, math.ceil(q * a.size))
    idx = rank - 1
    # introselect: expected O(N)
    return float(np.partition(a, idx)[idx])


def _effective_rates(scores: np.ndarray, policy: PrunePolicy, threshold: float) -> np.ndarray:
    """Per-sample prune probability P(z) for the info_batch policy."""
    below = scores < threshold
    p = np.where(below, policy.r, 0.0)
    if policy.tier is not None:
        boundary = quantile(scores, policy.tier.quantile)
        p = np.where(below & (scores <= boundary), policy.tier.r_aggressive, p)
    return p


def plan_epoch(table: ScoreTable, policy: PrunePolicy, seed: int) -> EpochPlan:
    """Plan one epoch: which samples train and at what loss weight.

    Pure in (scores, policy, epoch, seed); identical inputs give a
    bit-identical plan. During annealing (epoch >= delta * total_epochs,
    zero-indexed, real-valued comparison) every sample is kept at weight 1.
    """
    n = table.size
    epoch = table.epoch
    if epoch >= policy.total_epochs:
        raise OutOfRangeError(f"epoch {epoch} >= total_epochs {policy.total_epochs}")

    if policy.kind == "none":
        return _identity_plan(n, epoch, threshold=mean_threshold(table))
    if policy.kind == "static_hard":
        plan = static_hard_plan(table.scores, policy.keep_fraction)
        plan.epoch = epoch
        return plan
    if policy.kind == "dynamic_random":
        return dynamic_random_plan(n, policy.keep_prob, epoch, seed)

    thr = mean_threshold(table)
    if epoch >= policy.delta * policy.total_epochs:
        return _identity_plan(n, epoch, threshold=thr)

    p = _effective_rates(table.scores, policy, thr)
    u = _philox(seed, epoch).random(n)
    keep = u >= p  # p == 0 above threshold, so those always survive
    kept_ids = np.flatnonzero(keep)
    if policy.rescale_mode == "per_sample":
        weights = 1.0 / (1.0 - p[kept_ids])
    else:
        weights = np.full(kept_ids.size, n / kept_ids.size)
    return EpochPlan(
        kept_ids=kept_ids,
        weights=weights,
        threshold=thr,
        kept_ratio=kept_ids.size / n,
        epoch=epoch,
    )


def _identity_plan(n: int, epoch: int, threshold: float = float("nan")) -> EpochPlan:
    return EpochPlan(
        kept_ids=np.arange(n),
        weights=np.ones(n),
        threshold=threshold,
        kept_ratio=1.0,
        epoch=epoch,
    )


def static_hard_plan(scores: np.ndarray, keep_fraction: float) -> EpochPlan:
    """Keep the ceil(keep_fraction*N) highest-score samples, weight 1.

    Baseline only; deliberately uses a full sort (it exists to demonstrate
    the bias and cost of deterministic hard pruning). Ties break toward the
    lower sample id.
    """
    a = np.asarray(scores, dtype=np.float64)
    if keep_fraction <= 0.0 or keep_fraction > 1.0:
        raise InvalidArgumentError("keep_fraction must be in (0, 1]")
    n = a.size
    k = math.ceil(keep_fraction * n)
    # stable sort on -scores: equal scores keep ascending-id order
    order = np.argsort(-a, kind="stable")
    kept_ids = np.sort(order[:k])
    return EpochPlan(
        kept_ids=kept_ids,
        weights=np.ones(k),
        threshold=float(a[order[k - 1]]),
        kept_ratio=k / n,
        epoch=0,
    )


def dynamic_random_plan(n: int, keep_prob: float, epoch: int, seed: int) -> EpochPlan:
    """Keep each sample independently with probability keep_prob, weight 1."""
    if not 0.0 < keep_prob <= 1.0:
        raise InvalidArgumentError("keep_prob must be in (0, 1]")
    u = _philox(seed, epoch).random(n)
    kept_ids = np.flatnonzero(u < keep_prob)
    return EpochPlan(
        kept_ids=kept_ids,
        weights=np.ones(kept_ids.size),
        threshold=float("nan"),
        kept_ratio=kept_ids.size / n,
        epoch=epoch,
    )


def update_scores(table: ScoreTable, plan: EpochPlan, losses: np.ndarray) -> ScoreTable:
    """Overwrite kept samples' scores with their latest losses, in place.

    Pruned samples keep their old score; the epoch counter advances by one.
    Losses are clamped into [0, SCORE_CLAMP_MAX] with a logged warning.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape[0] != plan.kept_ids.shape[0]:
        raise InvalidArgumentError(
            f"got {losses.shape[0]} losses for {plan.kept_ids.shape[0]} kept samples"
        )
    bad = ~np.isfinite(losses)
    if bad.any():
        sid = int(plan.kept_ids[np.flatnonzero(bad)[0]])
        raise DataCorruptionError(f"non-finite loss for sample id {sid}")
    clipped = np.clip(losses, 0.0, SCORE_CLAMP_MAX)
    if (clipped != losses).any():
        log.warning("clamped %d losses into [0, %g]", int((clipped != losses).sum()), SCORE_CLAMP_MAX)
    table.scores[plan.kept_ids] = clipped
    table.epoch += 1
    return table


def prune_probabilities(scores: np.ndarray, policy: PrunePolicy) -> np.ndarray:
    """Per-sample prune probability P(z) inside the pruning window."""
    a = np.asarray(scores, dtype=np.float64)
    return _effective_rates(a, policy, float(np.mean(a)))


def expected_kept_fraction(scores: np.ndarray, policy: PrunePolicy) -> float:
    """Analytic E[|S_t|]/|D| inside the pruning window: 1 - sum_z P(z)/N."""
    a = np.asarray(scores, dtype=np.float64)
    thr = float(np.mean(a))
    p = _effective_rates(a, policy, thr)
    return float(1.0 - p.mean())


def reconstruct_mixup_scores(
    mixed_probs: np.ndarray, labels: np.ndarray, alpha: float, atol: float = 1e-6
) -> np.ndarray:
    """Recover per-sample scores from a mixed batch's predictions.

    With batch-level mixing pairing sample i with j = B-1-i, the score of
    sample i is P_i[y_i] + P_j[y_i]: the probability mass the model assigns
    to i's true class from both halves of the interpolation.
    """
    probs = np.asarray(mixed_probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise InvalidArgumentError("mixed_probs must be (batch, classes) matching labels")
    if probs.shape[0] % 2 != 0:
        raise InvalidArgumentError("mixed batch must pair every sample: batch size is odd")
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError("alpha must be in (0, 1]")
    sums = probs.sum(axis=1)
    off = np.flatnonzero(np.abs(sums - 1.0) > atol)
    if off.size:
        raise DataCorruptionError(
            f"probability vector of sample {int(off[0])} sums to {sums[off[0]]:.8f}"
        )
    b = probs.shape[0]
    rows = np.arange(b)
    partner = b - 1 - rows
    return probs[rows, labels] + probs[partner, labels]
