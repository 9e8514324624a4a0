"""Named verification suites behind the ``verify`` CLI entry point.

Each check yields one record {test, statistic, stderr, threshold, pass}.
Seeds are fixed and every tolerance is 3-sigma-safe at the stated trial
counts, so a failure means a real regression, not an unlucky draw.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .analysis import (
    analytic_policy_variance,
    bench_threshold_vs_sort,
    exact_quadratic_gradient,
    lr_stability_bound,
    mc_policy_gradient,
    mc_within_plan_variance,
    policy_bias,
    simulate_rescaled_descent,
)
from .data import QuadraticSet, gen_quadratic
from .errors import InvalidArgumentError
from .pruning import (
    PrunePolicy,
    ScoreTable,
    expected_kept_fraction,
    plan_epoch,
    prune_probabilities,
    reconstruct_mixup_scores,
)


@dataclass
class CheckRecord:
    test: str
    statistic: float
    stderr: Optional[float]
    threshold: float
    passed: bool

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _record(test, statistic, threshold, passed, stderr=None) -> CheckRecord:
    return CheckRecord(
        test=test, statistic=float(statistic), stderr=stderr,
        threshold=float(threshold), passed=bool(passed),
    )


def _reference_quadratic(seed: int) -> tuple[QuadraticSet, np.ndarray, np.ndarray]:
    """Fixed 100-sample set; scores are the current per-sample losses."""
    qs = gen_quadratic(100, (0.5, 2.0), (-1.0, 2.0), seed=seed, dim=3)
    theta = np.array([2.0, -1.0, 0.5])
    return qs, theta, qs.per_sample_losses(theta)


def _skewed_quadratic() -> tuple[QuadraticSet, np.ndarray, np.ndarray]:
    """Low-loss samples share one gradient direction, high-loss another, so
    deterministically dropping the low-loss half visibly bends the mean."""
    theta = np.zeros(2)
    b = np.concatenate([np.tile([-1.0, 0.0], (50, 1)), np.tile([0.0, -2.0], (50, 1))])
    qs = QuadraticSet(a=np.ones((100, 2)), b=b)
    return qs, theta, qs.per_sample_losses(theta)


def suite_unbiasedness(seed: int) -> List[CheckRecord]:
    records = []
    qs, theta, scores = _reference_quadratic(seed + 7)
    policy = PrunePolicy(kind="info_batch", r=0.5, delta=0.875, total_epochs=100)

    mc = mc_policy_gradient(qs, theta, scores, policy, trials=100_000, seed=seed)
    exact = exact_quadratic_gradient(qs, theta)
    target = exact / mc.mean_kept_ratio
    rel = float(np.linalg.norm(mc.mean - target) / np.linalg.norm(target))
    se = float(np.sqrt(mc.variance.sum() / mc.trials) / np.linalg.norm(target))
    records.append(_record("rescaled_gradient_unbiased", rel, 0.01, rel < 0.01, se))

    sq, stheta, sscores = _skewed_quadratic()
    hard = PrunePolicy(kind="static_hard", keep_fraction=0.5)
    bias_hard, _ = policy_bias(sq, stheta, sscores, hard, trials=100_000, seed=seed)
    records.append(_record("hard_prune_direction_bias", bias_hard, 0.05, bias_hard > 0.05))
    bias_soft, ratio_soft = policy_bias(sq, stheta, sscores, policy, trials=100_000, seed=seed + 1)
    records.append(_record("soft_prune_direction_bias", bias_soft, 0.01, bias_soft < 0.01))

    # E[sum of weights] over kept samples equals |D| in per_sample mode
    table = ScoreTable(scores=scores.copy(), epoch=0)
    totals = np.empty(10_000)
    for s in range(totals.size):
        plan = plan_epoch(table, policy, seed=seed + 31 + s)
        totals[s] = plan.weights.sum()
    mass_err = abs(totals.mean() - qs.size) / qs.size
    mass_se = float(totals.std() / math.sqrt(totals.size) / qs.size)
    records.append(_record("unit_weight_mass", mass_err, 0.005, mass_err < 0.005, mass_se))

    # analytic expected kept fraction vs Monte-Carlo realized ratio
    analytic = expected_kept_fraction(scores, policy)
    ratios = np.empty(10_000)
    for s in range(ratios.size):
        ratios[s] = plan_epoch(table, policy, seed=seed + 77 + s).kept_ratio
    frac_err = abs(ratios.mean() - analytic)
    frac_se = float(ratios.std() / math.sqrt(ratios.size))
    records.append(_record("expected_kept_fraction", frac_err, 0.005, frac_err < 0.005, frac_se))
    return records


def suite_variance(seed: int) -> List[CheckRecord]:
    records = []
    qs, theta, scores = _reference_quadratic(seed + 13)
    grads = qs.per_sample_gradients(theta)
    n = qs.size

    # all-zero probabilities: exact population-variance identity
    ident = analytic_policy_variance(grads, np.zeros(n), n)
    pop = grads.var(axis=0)
    err = float(np.abs(ident - pop).max() / max(pop.max(), 1e-300))
    records.append(_record("population_variance_identity", err, 1e-12, err < 1e-12))

    # uniform prune probability: noise-to-signal ratio unchanged
    p_uniform = np.full(n, 0.5)
    kept = n * 0.5
    uni = analytic_policy_variance(grads, p_uniform, kept)
    expected = (n / kept) ** 2 * pop
    err_u = float(np.abs(uni - expected).max() / expected.max())
    records.append(_record("uniform_prune_scales_variance", err_u, 1e-12, err_u < 1e-12))

    # formula vs Monte-Carlo spread of rescaled kept-sample gradients
    policy = PrunePolicy(kind="info_batch", r=0.5, delta=0.875, total_epochs=100)
    probs = prune_probabilities(scores, policy)
    kept_size = n * expected_kept_fraction(scores, policy)
    analytic = analytic_policy_variance(grads, probs, kept_size)
    mc = mc_within_plan_variance(qs, theta, scores, policy, trials=100_000, seed=seed)
    rel = float(np.abs(mc - analytic).max() / analytic.max())
    records.append(_record("variance_formula_vs_mc", rel, 0.10, rel < 0.10))

    # variance-reduction condition: low loss implies small gradient here
    mono = QuadraticSet(a=np.ones((100, 1)), b=np.linspace(-2.0, 2.0, 100)[:, None])
    mtheta = np.array([3.0])
    mscores = mono.per_sample_losses(mtheta)
    mprobs = prune_probabilities(mscores, policy)
    mkept = 100 * expected_kept_fraction(mscores, policy)
    mg = mono.per_sample_gradients(mtheta)
    pruned_var = analytic_policy_variance(mg, mprobs, mkept)
    cap = (100 / mkept) ** 2 * mg.var(axis=0) * 1.05
    ok = bool((pruned_var <= cap).all())
    records.append(_record("variance_reduction_condition", float(pruned_var.max() / cap.max()), 1.0, ok))
    return records


def suite_annealing(seed: int) -> List[CheckRecord]:
    records = []
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    scores = rng.uniform(0.01, 3.0, 400)
    policy = PrunePolicy(kind="info_batch", r=0.5, delta=0.875, total_epochs=80)
    exact = True
    for epoch in range(70, 80):
        table = ScoreTable(scores=scores.copy(), epoch=epoch)
        plan = plan_epoch(table, policy, seed=seed + epoch)
        exact &= plan.kept_ratio == 1.0 and (plan.weights == 1.0).all() and plan.kept_ids.size == 400
    records.append(_record("annealing_full_pass", 0.0 if exact else 1.0, 0.0, exact))

    table = ScoreTable(scores=scores.copy(), epoch=69)
    plan = plan_epoch(table, policy, seed=seed)
    records.append(
        _record("pruning_active_before_annealing", plan.kept_ratio, 1.0, plan.kept_ratio < 1.0)
    )
    return records


def suite_lr_bound(seed: int) -> List[CheckRecord]:
    records = []
    unit = QuadraticSet(a=np.ones((1, 1)), b=np.zeros((1, 1)))
    bound = lr_stability_bound(unit, np.array([1.0]), batch_size=1, kept_fraction=1.0)
    records.append(_record("quadratic_limit_is_two", abs(bound - 2.0), 1e-12, abs(bound - 2.0) < 1e-12))

    half = lr_stability_bound(unit, np.array([1.0]), batch_size=1, kept_fraction=0.5)
    records.append(_record("bound_linear_in_kept", abs(half - 1.0), 1e-12, abs(half - 1.0) < 1e-12))

    qs = gen_quadratic(200, (0.8, 1.2), (-0.5, 0.5), seed=seed + 3, dim=1)
    theta0 = np.array([5.0])
    scores = qs.per_sample_losses(theta0)
    policy = PrunePolicy(kind="info_batch", r=0.5, delta=0.875, total_epochs=100)
    probs = prune_probabilities(scores, policy)
    kf = expected_kept_fraction(scores, policy)
    bound = lr_stability_bound(qs, theta0, batch_size=8, kept_fraction=kf)
    loss0 = float(qs.per_sample_losses(theta0).mean())
    lo = simulate_rescaled_descent(qs, theta0, 0.9 * bound, 8, probs, 100, 1000, seed)
    hi = simulate_rescaled_descent(qs, theta0, 1.5 * bound, 8, probs, 100, 1000, seed + 1)
    records.append(_record("descent_below_bound", lo / loss0, 1.0, lo < loss0))
    records.append(_record("divergence_above_bound", min(hi / loss0, 1e18), 1.0, hi > loss0))
    return records


def suite_mixup(seed: int) -> List[CheckRecord]:
    records = []
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    k, b = 6, 16
    # pairing is positional (i with b-1-i); force y_i != y_partner
    half = rng.integers(0, k, b // 2)
    other = (half + rng.integers(1, k, b // 2)) % k
    labels = np.concatenate([half, other[::-1]])
    partner = labels[::-1]
    alpha = 0.3
    probs = np.zeros((b, k))
    probs[np.arange(b), labels] = alpha
    probs[np.arange(b), partner] += 1.0 - alpha
    scores = reconstruct_mixup_scores(probs, labels, alpha)
    err = float(np.abs(scores - 1.0).max())
    records.append(_record("perfect_prediction_scores_one", err, 1e-9, err < 1e-9))

    raw = rng.random((b, k))
    raw /= raw.sum(axis=1, keepdims=True)
    got = reconstruct_mixup_scores(raw, labels, 1.0)
    direct = np.array([raw[i, labels[i]] + raw[b - 1 - i, labels[i]] for i in range(b)])
    exact = float(np.abs(got - direct).max())
    records.append(_record("random_batch_matches_formula", exact, 0.0, exact == 0.0))
    return records


SUITES: Dict[str, Callable[[int], List[CheckRecord]]] = {
    "unbiasedness": suite_unbiasedness,
    "variance": suite_variance,
    "annealing": suite_annealing,
    "lr_bound": suite_lr_bound,
    "mixup": suite_mixup,
}


def run_suite(name: str, seed: int = 0) -> List[CheckRecord]:
    if name not in SUITES:
        raise InvalidArgumentError(
            f"unknown suite {name!r}; valid suites: {', '.join(sorted(SUITES))}"
        )
    return SUITES[name](seed)
