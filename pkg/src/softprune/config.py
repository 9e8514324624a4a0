"""Strict JSON run configuration.

No defaults are applied silently: the fully materialized effective config
is echoed as the first output record of every run. Unknown keys and
out-of-range values are rejected with their key path.
"""

from __future__ import annotations

import json
from typing import Any, Dict

from .errors import InvalidArgumentError
from .pruning import PrunePolicy, TierSpec
from .training import RunConfig

_TOP_KEYS = {
    "dataset", "model", "optimizer", "schedule", "epochs", "batch_size",
    "policy", "eval_fraction", "seed", "lr_scale_by_keep",
}
_DATASET_GEN_KEYS = {"generator", "classes", "per_class", "dim", "separation", "noise", "seed"}
_DATASET_CSV_KEYS = {"csv", "feature_columns", "label_column", "label_kind", "standardize"}
_MODEL_KEYS = {"kind", "layer_sizes"}
_OPT_KEYS = {"lr_max", "momentum", "weight_decay"}
_SCHED_KEYS = {"kind", "warmup_fraction"}
_POLICY_KEYS = {"kind", "r", "delta", "rescale_mode", "tier", "keep_prob", "keep_fraction"}
_TIER_KEYS = {"quantile", "r_aggressive"}


def _reject_unknown(section: Dict[str, Any], allowed: set, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise InvalidArgumentError(f"unknown config key {path}.{key}" if path else f"unknown config key {key}")


def _require(section: Dict[str, Any], key: str, path: str) -> Any:
    if key not in section:
        raise InvalidArgumentError(f"missing config key {path}.{key}")
    return section[key]


def parse_policy(section: Dict[str, Any]) -> PrunePolicy:
    _reject_unknown(section, _POLICY_KEYS, "policy")
    tier = None
    if section.get("tier") is not None:
        tier_raw = section["tier"]
        _reject_unknown(tier_raw, _TIER_KEYS, "policy.tier")
        tier = TierSpec(
            quantile=float(_require(tier_raw, "quantile", "policy.tier")),
            r_aggressive=float(_require(tier_raw, "r_aggressive", "policy.tier")),
        )
    try:
        return PrunePolicy(
            kind=_require(section, "kind", "policy"),
            r=float(section.get("r", 0.5)),
            delta=float(section.get("delta", 0.875)),
            rescale_mode=section.get("rescale_mode", "per_sample"),
            tier=tier,
            keep_prob=float(section.get("keep_prob", 1.0)),
            keep_fraction=float(section.get("keep_fraction", 1.0)),
        )
    except InvalidArgumentError as exc:
        msg = str(exc)
        field = msg.split(" ", 1)[0]
        if field in {"r", "delta", "keep_prob", "keep_fraction", "total_epochs", "tier"}:
            raise InvalidArgumentError(f"policy.{msg}") from None
        raise InvalidArgumentError(f"policy: {msg}") from None


def parse_run_config(raw: Dict[str, Any]) -> RunConfig:
    if not isinstance(raw, dict):
        raise InvalidArgumentError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "")

    dataset = dict(_require(raw, "dataset", "config"))
    if "generator" in dataset:
        _reject_unknown(dataset, _DATASET_GEN_KEYS, "dataset")
    elif "csv" in dataset:
        _reject_unknown(dataset, _DATASET_CSV_KEYS, "dataset")
    else:
        raise InvalidArgumentError("dataset needs either 'generator' or 'csv'")

    model = dict(_require(raw, "model", "config"))
    _reject_unknown(model, _MODEL_KEYS, "model")

    opt = dict(raw.get("optimizer", {}))
    _reject_unknown(opt, _OPT_KEYS, "optimizer")
    sched = dict(raw.get("schedule", {}))
    _reject_unknown(sched, _SCHED_KEYS, "schedule")

    policy = parse_policy(dict(_require(raw, "policy", "config")))
    try:
        epochs = int(_require(raw, "epochs", "config"))
        cfg = RunConfig(
            dataset=dataset,
            model=model,
            policy=policy,
            epochs=epochs,
            batch_size=int(_require(raw, "batch_size", "config")),
            lr_max=float(opt.get("lr_max", 0.1)),
            momentum=float(opt.get("momentum", 0.9)),
            weight_decay=float(opt.get("weight_decay", 5e-4)),
            schedule_kind=sched.get("kind", "onecycle"),
            warmup_fraction=float(sched.get("warmup_fraction", 0.3)),
            eval_fraction=float(raw.get("eval_fraction", 0.2)),
            seed=int(raw.get("seed", 0)),
            lr_scale_by_keep=bool(raw.get("lr_scale_by_keep", False)),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(str(exc)) from None
    return cfg


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    return parse_run_config(raw)


def effective_config(cfg: RunConfig) -> Dict[str, Any]:
    """Every field, defaults materialized: runs are self-describing."""
    policy = {
        "kind": cfg.policy.kind,
        "r": cfg.policy.r,
        "delta": cfg.policy.delta,
        "rescale_mode": cfg.policy.rescale_mode,
        "tier": None
        if cfg.policy.tier is None
        else {"quantile": cfg.policy.tier.quantile, "r_aggressive": cfg.policy.tier.r_aggressive},
        "keep_prob": cfg.policy.keep_prob,
        "keep_fraction": cfg.policy.keep_fraction,
    }
    return {
        "dataset": cfg.dataset,
        "model": cfg.model,
        "optimizer": {
            "lr_max": cfg.lr_max,
            "momentum": cfg.momentum,
            "weight_decay": cfg.weight_decay,
        },
        "schedule": {"kind": cfg.schedule_kind, "warmup_fraction": cfg.warmup_fraction},
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "policy": policy,
        "eval_fraction": cfg.eval_fraction,
        "seed": cfg.seed,
        "lr_scale_by_keep": cfg.lr_scale_by_keep,
    }
