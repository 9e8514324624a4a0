"""The training loop wiring the epoch planner into SGD.

Per epoch: plan which samples train, shuffle them with the epoch seed,
run weighted minibatch SGD under the one-cycle schedule, then feed the
observed per-sample losses back into the score table. Losses are recorded
before the optimizer step of their own batch, so scores reflect the model
state that consumed them.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import data as data_mod
from .errors import InvalidArgumentError
from .models import (
    DenseModel,
    OptimizerState,
    ScheduleConfig,
    backward_weighted,
    forward_per_sample,
    onecycle_lr,
    sgd_momentum_step,
)
from .pruning import (
    EpochPlan,
    PrunePolicy,
    ScoreTable,
    expected_kept_fraction,
    new_score_table,
    plan_epoch,
    static_hard_plan,
    update_scores,
)


@dataclass(frozen=True)
class RunConfig:
    dataset: dict
    model: dict
    policy: PrunePolicy
    epochs: int
    batch_size: int
    lr_max: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    schedule_kind: str = "onecycle"
    warmup_fraction: float = 0.3
    eval_fraction: float = 0.2
    seed: int = 0
    # Open option: scale lr by |D|/|S_t| when steps shrink. Off by default.
    lr_scale_by_keep: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if not 0.0 <= self.eval_fraction < 1.0:
            raise InvalidArgumentError("eval_fraction must be in [0, 1)")


@dataclass
class EpochMetrics:
    epoch: int
    kept_count: int
    kept_ratio: float
    threshold: float
    mean_train_loss: float
    eval_metric: float
    cumulative_sample_forwards: int
    wall_ms: float


def build_dataset(spec: dict) -> data_mod.Dataset:
    spec = dict(spec)
    gen = spec.pop("generator", None)
    if gen == "blobs":
        return data_mod.gen_blobs(**spec)
    if gen is None and "csv" in spec:
        path = spec.pop("csv")
        ds = data_mod.load_csv(path, **{k: v for k, v in spec.items() if k != "standardize"})
        if spec.get("standardize"):
            ds = data_mod.standardize(ds)
        return ds
    raise InvalidArgumentError(f"unknown dataset spec {spec!r}")


def split_eval(dataset: data_mod.Dataset, eval_fraction: float, seed: int):
    """Seeded train/eval split; returns (train, eval_or_None)."""
    n = dataset.size
    n_eval = int(round(eval_fraction * n))
    if n_eval == 0:
        return dataset, None
    perm = data_mod._philox(seed ^ 0xA5A5A5A5, 0).permutation(n)
    tr, ev = perm[n_eval:], perm[:n_eval]
    mk = lambda ids: data_mod.Dataset(
        features=dataset.features[ids],
        labels=dataset.labels[ids],
        kind=dataset.kind,
        provenance=dataset.provenance,
    )
    return mk(np.sort(tr)), mk(np.sort(ev))


def evaluate(model: DenseModel, dataset: data_mod.Dataset) -> float:
    """Accuracy for classifiers, mean loss for regression."""
    if dataset.size == 0:
        raise InvalidArgumentError("cannot evaluate on an empty dataset")
    losses, preds = forward_per_sample(model, dataset.features, dataset.labels)
    if dataset.kind == "regression":
        return float(losses.mean())
    return float((preds.argmax(axis=1) == dataset.labels).mean())


def planned_total_steps(policy: PrunePolicy, n_train: int, batch_size: int, epochs: int) -> int:
    """Deterministic step budget for the scheduler, fixed before training.

    Realized kept counts drift around this estimate; the trainer clamps any
    overshoot to the schedule's floor lr.
    """
    def steps(frac: float) -> int:
        return math.ceil(math.ceil(frac * n_train) / batch_size)

    if policy.kind == "none":
        return max(1, epochs * steps(1.0))
    if policy.kind == "static_hard":
        return max(1, epochs * steps(policy.keep_fraction))
    if policy.kind == "dynamic_random":
        return max(1, epochs * steps(policy.keep_prob))
    total = 0
    for t in range(epochs):
        if t == 0 or t >= policy.delta * epochs:
            total += steps(1.0)  # fresh equal scores / annealing window
        else:
            # score distribution unknown ahead of time; assume half below mean
            frac = 1.0 - policy.r * 0.5
            if policy.tier is not None:
                frac -= (policy.tier.r_aggressive - policy.r) * policy.tier.quantile
            total += steps(frac)
    return max(1, total)


def train(config: RunConfig) -> List[EpochMetrics]:
    dataset = build_dataset(config.dataset)
    train_set, eval_set = split_eval(dataset, config.eval_fraction, config.seed)
    model = DenseModel.create(config.model["kind"], config.model["layer_sizes"], seed=config.seed)
    opt = OptimizerState.for_model(model, config.momentum, config.weight_decay)

    n = train_set.size
    policy = config.policy
    if policy.total_epochs != config.epochs:
        policy = dataclasses.replace(policy, total_epochs=max(config.epochs, 1))
    schedule = ScheduleConfig(
        kind=config.schedule_kind,
        lr_max=config.lr_max,
        total_steps=planned_total_steps(policy, n, config.batch_size, config.epochs),
        warmup_fraction=config.warmup_fraction,
    )

    table = new_score_table(n)
    static_plan: Optional[EpochPlan] = None
    metrics: List[EpochMetrics] = []
    step = 0
    forwards = 0

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        if policy.kind == "static_hard":
            # static baseline: planned once, reused unchanged every epoch
            if static_plan is None:
                static_plan = static_hard_plan(table.scores, policy.keep_fraction)
            plan = EpochPlan(
                kept_ids=static_plan.kept_ids, weights=static_plan.weights,
                threshold=static_plan.threshold, kept_ratio=static_plan.kept_ratio, epoch=epoch,
            )
            table.epoch = epoch
        else:
            plan = plan_epoch(table, policy, config.seed)

        epoch_losses = np.empty(plan.kept_ids.size)
        pos_of = np.empty(n, dtype=np.int64)
        pos_of[plan.kept_ids] = np.arange(plan.kept_ids.size)
        weight_of = np.zeros(n)
        weight_of[plan.kept_ids] = plan.weights

        loss_sum = 0.0
        for batch_ids in data_mod.batches(plan.kept_ids, config.batch_size, config.seed, epoch):
            x = train_set.features[batch_ids]
            y = train_set.labels[batch_ids]
            losses, _ = forward_per_sample(model, x, y)
            epoch_losses[pos_of[batch_ids]] = losses
            loss_sum += float(losses.sum())
            backward_weighted(model, x, y, weight_of[batch_ids])
            lr = onecycle_lr(min(step, schedule.total_steps - 1), schedule)
            if config.lr_scale_by_keep and plan.kept_ratio > 0:
                lr /= plan.kept_ratio
            sgd_momentum_step(model, opt, lr)
            step += 1
            forwards += batch_ids.size

        if policy.kind != "static_hard":
            table = update_scores(table, plan, epoch_losses)
        eval_metric = evaluate(model, eval_set) if eval_set is not None else float("nan")
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                kept_count=int(plan.kept_ids.size),
                kept_ratio=plan.kept_ratio,
                threshold=plan.threshold,
                mean_train_loss=loss_sum / max(plan.kept_ids.size, 1),
                eval_metric=eval_metric,
                cumulative_sample_forwards=forwards,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
    return metrics
