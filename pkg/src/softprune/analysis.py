"""Bias, variance, stability, and complexity checks for pruning policies.

Quadratic sample families make every quantity closed-form, so Monte-Carlo
estimates from real epoch plans can be compared against exact values. All
randomness is keyed per trial, so results do not depend on execution order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data import QuadraticSet
from .errors import InvalidArgumentError
from .pruning import (
    PrunePolicy,
    ScoreTable,
    dynamic_random_plan,
    mean_threshold,
    plan_epoch,
    quantile,
    static_hard_plan,
)


def exact_quadratic_gradient(qs: QuadraticSet, theta: np.ndarray) -> np.ndarray:
    """(1/N) * sum_i a_i (theta - b_i), closed form."""
    return qs.per_sample_gradients(theta).mean(axis=0)


def _trial_plan(scores: np.ndarray, policy: PrunePolicy, seed: int, trial: int):
    table = ScoreTable(scores=np.asarray(scores, dtype=np.float64), epoch=0)
    if policy.kind == "static_hard":
        return static_hard_plan(table.scores, policy.keep_fraction)
    if policy.kind == "dynamic_random":
        return dynamic_random_plan(table.size, policy.keep_prob, 0, seed + trial)
    return plan_epoch(table, policy, seed + trial)


@dataclass
class McGradient:
    mean: np.ndarray          # per-coordinate mean of the rescaled gradient
    variance: np.ndarray      # per-coordinate variance across trials
    mean_kept_ratio: float
    trials: int


def mc_policy_gradient(
    qs: QuadraticSet,
    theta: np.ndarray,
    scores: np.ndarray,
    policy: PrunePolicy,
    trials: int,
    seed: int,
) -> McGradient:
    """Draw ``trials`` independent plans; per trial the rescaled mean
    gradient is (1/|S_t|) * sum_{kept} gamma_z * grad_z(theta)."""
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    grads = qs.per_sample_gradients(theta)
    d = grads.shape[1]
    s = np.zeros(d)
    ss = np.zeros(d)
    kept_sum = 0.0
    for t in range(trials):
        plan = _trial_plan(scores, policy, seed, t)
        g = (plan.weights[:, None] * grads[plan.kept_ids]).sum(axis=0) / plan.kept_ids.size
        s += g
        ss += g * g
        kept_sum += plan.kept_ratio
    mean = s / trials
    var = np.maximum(ss / trials - mean * mean, 0.0)
    return McGradient(mean=mean, variance=var, mean_kept_ratio=kept_sum / trials, trials=trials)


def policy_bias(
    qs: QuadraticSet,
    theta: np.ndarray,
    scores: np.ndarray,
    policy: PrunePolicy,
    trials: int,
    seed: int,
) -> Tuple[float, float]:
    """(direction bias, magnitude ratio) of the rescaled gradient vs the
    |D|/|S_t|-scaled exact gradient.

    Direction bias is 1 - cosine similarity; an unbiased policy gives 0
    and ratio 1 up to Monte-Carlo noise.
    """
    mc = mc_policy_gradient(qs, theta, scores, policy, trials, seed)
    exact = exact_quadratic_gradient(qs, theta)
    scale = 1.0 / mc.mean_kept_ratio
    norm_mc = float(np.linalg.norm(mc.mean))
    norm_ref = float(np.linalg.norm(exact)) * scale
    if norm_mc == 0.0 or norm_ref == 0.0:
        raise InvalidArgumentError("zero gradient: bias direction undefined")
    cos = float(mc.mean @ exact) / (norm_mc * float(np.linalg.norm(exact)))
    return 1.0 - cos, norm_mc / norm_ref


def analytic_policy_variance(
    per_sample_gradients: np.ndarray, prune_probs: np.ndarray, kept_size: float
) -> np.ndarray:
    """Per-coordinate variance of the rescaled kept-sample gradient:

        (1/|S_t|) * sum_z G_z^2 / (1 - P(z))  -  (|D|/|S_t|)^2 * G^2

    With all probabilities zero and kept_size = |D| this reduces exactly to
    the population variance of the per-sample gradients.
    """
    g = np.atleast_2d(np.asarray(per_sample_gradients, dtype=np.float64))
    p = np.asarray(prune_probs, dtype=np.float64)
    if (p < 0).any() or (p >= 1).any():
        raise InvalidArgumentError("prune probabilities must lie in [0, 1): P=1 is a hard prune")
    if kept_size <= 0:
        raise InvalidArgumentError("kept_size must be > 0")
    n = g.shape[0]
    mean_g = g.mean(axis=0)
    second = (g * g / (1.0 - p)[:, None]).sum(axis=0) / kept_size
    return second - (n / kept_size) ** 2 * mean_g**2


def mc_within_plan_variance(
    qs: QuadraticSet,
    theta: np.ndarray,
    scores: np.ndarray,
    policy: PrunePolicy,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Monte-Carlo oracle for the rescaled-gradient variance: the empirical
    per-coordinate spread of gamma_z * grad_z across kept samples, averaged
    over independently drawn plans."""
    grads = qs.per_sample_gradients(theta)
    acc = np.zeros(grads.shape[1])
    for t in range(trials):
        plan = _trial_plan(scores, policy, seed, t)
        g = plan.weights[:, None] * grads[plan.kept_ids]
        acc += g.var(axis=0)
    return acc / trials


def lr_stability_bound(
    qs: QuadraticSet, theta: np.ndarray, batch_size: int, kept_fraction: float = 1.0
) -> Optional[float]:
    """Largest step size with a negative expected second-order loss change
    under the |D|/|S_t|-rescaled gradient estimator:

        2 |G|^2 |S_t| / ((G^T H G + tr(H Sigma)/B) |D|)

    Returns None when the gradient is zero (the bound is unbounded).
    """
    if batch_size < 1:
        raise InvalidArgumentError("batch_size must be >= 1")
    if not 0.0 < kept_fraction <= 1.0:
        raise InvalidArgumentError("kept_fraction must be in (0, 1]")
    g_all = qs.per_sample_gradients(theta)
    grad = g_all.mean(axis=0)
    if not np.any(grad):
        return None
    hess = qs.a.mean(axis=0)  # diagonal Hessian of the mean loss
    sigma = g_all.var(axis=0)  # diagonal of the per-sample gradient covariance
    curvature = float(hess @ (grad * grad)) + float(hess @ sigma) / batch_size
    return 2.0 * float(grad @ grad) * kept_fraction / curvature


def simulate_rescaled_descent(
    qs: QuadraticSet,
    theta0: np.ndarray,
    lr: float,
    batch_size: int,
    prune_probs: np.ndarray,
    steps: int,
    n_seeds: int,
    seed: int,
) -> float:
    """Mean full-data loss after SGD with rescaled pruned-batch gradients,
    averaged over independent seeds. Batches are drawn from the kept-sample
    distribution; each draw carries its 1/(1-P) weight."""
    p = np.asarray(prune_probs, dtype=np.float64)
    keep = 1.0 - p
    q = keep / keep.sum()
    gamma = 1.0 / keep
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    thetas = np.tile(np.atleast_1d(np.asarray(theta0, dtype=np.float64)), (n_seeds, 1))
    n = qs.size
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            idx = rng.choice(n, size=(n_seeds, batch_size), p=q)
            diff = thetas[:, None, :] - qs.b[idx]
            g = (gamma[idx][:, :, None] * qs.a[idx] * diff).mean(axis=1)
            thetas -= lr * g
        losses = 0.5 * (qs.a[None, :, :] * (thetas[:, None, :] - qs.b[None, :, :]) ** 2).sum(
            axis=2
        ).mean(axis=1)
        losses = np.where(np.isfinite(losses), losses, np.finfo(np.float64).max)
    return float(losses.mean())


@dataclass
class BenchResult:
    n: int
    trials: int
    mean_ms: float
    quantile_ms: float
    sort_ms: float

    @property
    def sort_over_mean(self) -> float:
        return self.sort_ms / self.mean_ms


def bench_threshold_vs_sort(n: int, trials: int, seed: int = 0) -> BenchResult:
    """Median wall time of mean-threshold, selection quantile, and full sort
    on identical random arrays. Ratios, not absolute times, are the claim."""
    if n < 1000:
        raise InvalidArgumentError("n must be >= 1000 for stable timings")
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    t_mean, t_quant, t_sort = [], [], []
    for _ in range(trials):
        a = rng.random(n)
        table = ScoreTable(scores=a, epoch=0)
        t0 = time.perf_counter()
        mean_threshold(table)
        t_mean.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        quantile(a, 0.2)
        t_quant.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        np.sort(a)
        t_sort.append(time.perf_counter() - t0)
    med = lambda xs: float(np.median(xs) * 1e3)
    return BenchResult(
        n=n, trials=trials, mean_ms=med(t_mean), quantile_ms=med(t_quant), sort_ms=med(t_sort)
    )
