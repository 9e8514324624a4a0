"""Minimal dense models with manual backprop, SGD-momentum, and a one-cycle
learning-rate schedule.

Everything is double precision and runs on flat parameter vectors so the
verification harness can check gradients coordinate-by-coordinate against
finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError, OutOfRangeError

MODEL_KINDS = ("linear_regression", "logistic_regression", "mlp")


@dataclass
class DenseModel:
    """Flat-parameter model: linear regression, softmax regression, or a
    ReLU MLP. ``params`` and ``grad`` always have identical length."""

    kind: str
    layer_sizes: List[int]
    params: np.ndarray
    grad: np.ndarray

    @classmethod
    def create(cls, kind: str, layer_sizes: Sequence[int], seed: int = 0) -> "DenseModel":
        if kind not in MODEL_KINDS:
            raise InvalidArgumentError(f"unknown model kind {kind!r}")
        sizes = list(layer_sizes)
        if len(sizes) < 2:
            raise InvalidArgumentError("need at least input and output sizes")
        if kind in ("linear_regression", "logistic_regression") and len(sizes) != 2:
            raise InvalidArgumentError(f"{kind} takes exactly [input, output] sizes")
        if kind == "linear_regression" and sizes[-1] != 1:
            raise InvalidArgumentError("linear_regression output size must be 1")
        if kind == "mlp" and len(sizes) < 3:
            raise InvalidArgumentError("mlp needs at least one hidden layer")
        nparams = sum((fi + 1) * fo for fi, fo in zip(sizes[:-1], sizes[1:]))
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        params = np.zeros(nparams)
        if kind == "mlp":
            # Glorot-uniform weights, zero biases
            off = 0
            for fi, fo in zip(sizes[:-1], sizes[1:]):
                limit = math.sqrt(6.0 / (fi + fo))
                params[off : off + fi * fo] = rng.uniform(-limit, limit, fi * fo)
                off += (fi + 1) * fo
        return cls(kind=kind, layer_sizes=sizes, params=params, grad=np.zeros(nparams))

    def _layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into the flat parameter vector, one per layer."""
        out, off = [], 0
        for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.params[off : off + fi * fo].reshape(fi, fo)
            b = self.params[off + fi * fo : off + (fi + 1) * fo]
            out.append((w, b))
            off += (fi + 1) * fo
        return out

    def _grad_layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        out, off = [], 0
        for fi, fo in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            gw = self.grad[off : off + fi * fo].reshape(fi, fo)
            gb = self.grad[off + fi * fo : off + (fi + 1) * fo]
            out.append((gw, gb))
            off += (fi + 1) * fo
        return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_batch(model: DenseModel, features: np.ndarray, labels: np.ndarray):
    if features.ndim != 2 or features.shape[1] != model.layer_sizes[0]:
        raise InvalidArgumentError(
            f"feature width {features.shape} does not match model input {model.layer_sizes[0]}"
        )
    if labels.shape[0] != features.shape[0]:
        raise InvalidArgumentError("labels/features batch size mismatch")


def _forward_states(model: DenseModel, features: np.ndarray) -> List[np.ndarray]:
    """Activations per layer; the last entry is raw output (logits/prediction)."""
    acts = [features]
    layers = model._layers()
    h = features
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if model.kind == "mlp" and i < len(layers) - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    if not np.isfinite(acts[-1]).all():
        raise NumericOverflowError("non-finite activation in forward pass")
    return acts


def forward_per_sample(
    model: DenseModel, features: np.ndarray, labels: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample losses and predictions.

    Classifiers return softmax cross-entropy and class probabilities;
    regression returns squared error and the raw prediction.
    """
    features = np.asarray(features, dtype=np.float64)
    _check_batch(model, features, labels)
    out = _forward_states(model, features)[-1]
    if model.kind == "linear_regression":
        pred = out[:, 0]
        losses = (pred - np.asarray(labels, dtype=np.float64)) ** 2
        return losses, pred
    labels = np.asarray(labels)
    k = model.layer_sizes[-1]
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidArgumentError(f"class label outside [0, {k})")
    probs = _softmax(out)
    losses = -np.log(np.clip(probs[np.arange(len(labels)), labels], 1e-300, None))
    return losses, probs


def backward_weighted(
    model: DenseModel, features: np.ndarray, labels: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Accumulate into model.grad the gradient of (1/B) * sum_i w_i * L_i.

    Exactly linear in the weights: doubling every w_i doubles the gradient.
    """
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _check_batch(model, features, labels)
    if weights.shape[0] != features.shape[0]:
        raise InvalidArgumentError("weights length must equal batch size")
    if (weights <= 0).any():
        raise InvalidArgumentError("weights must be positive")
    b = features.shape[0]
    acts = _forward_states(model, features)
    out = acts[-1]

    if model.kind == "linear_regression":
        # d/dout of (pred - y)^2
        delta = (2.0 * (out[:, 0] - np.asarray(labels, dtype=np.float64)))[:, None]
    else:
        labels = np.asarray(labels)
        probs = _softmax(out)
        delta = probs.copy()
        delta[np.arange(b), labels] -= 1.0
    delta = delta * (weights / b)[:, None]

    layers = model._layers()
    grads = model._grad_layers()
    for i in range(len(layers) - 1, -1, -1):
        a_in = acts[i]
        gw, gb = grads[i]
        gw += a_in.T @ delta
        gb += delta.sum(axis=0)
        if i > 0:
            w, _ = layers[i]
            delta = delta @ w.T
            if model.kind == "mlp":
                delta = delta * (acts[i] > 0.0)
    if not np.isfinite(model.grad).all():
        raise NumericOverflowError("non-finite gradient in backward pass")
    return model.grad


@dataclass
class OptimizerState:
    velocity: np.ndarray
    momentum: float = 0.9
    weight_decay: float = 5e-4
    step: int = 0

    @classmethod
    def for_model(cls, model: DenseModel, momentum: float = 0.9, weight_decay: float = 5e-4):
        return cls(velocity=np.zeros_like(model.params), momentum=momentum, weight_decay=weight_decay)


def sgd_momentum_step(model: DenseModel, opt: OptimizerState, lr: float) -> np.ndarray:
    """v <- m*v + grad + wd*params; params <- params - lr*v; grad cleared."""
    opt.velocity *= opt.momentum
    opt.velocity += model.grad + opt.weight_decay * model.params
    model.params -= lr * opt.velocity
    if not np.isfinite(model.params).all():
        raise NumericOverflowError(f"non-finite parameters after step {opt.step}")
    model.grad[:] = 0.0
    opt.step += 1
    return model.params


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "onecycle"
    lr_max: float = 0.1
    total_steps: int = 1
    warmup_fraction: float = 0.3
    lr_floor: float = field(default=None)  # defaults to lr_max / 1e4

    def __post_init__(self):
        if self.kind not in ("onecycle", "constant"):
            raise InvalidArgumentError(f"unknown schedule kind {self.kind!r}")
        if self.lr_max <= 0 or self.total_steps < 1:
            raise InvalidArgumentError("lr_max must be > 0 and total_steps >= 1")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise InvalidArgumentError("warmup_fraction must be in (0, 1)")
        if self.lr_floor is None:
            object.__setattr__(self, "lr_floor", self.lr_max / 1e4)
        if self.lr_floor <= 0:
            raise InvalidArgumentError("lr_floor must be > 0")


def onecycle_lr(step: int, cfg: ScheduleConfig) -> float:
    """Cosine ramp floor->lr_max over the warmup fraction, then cosine
    anneal lr_max->floor; continuous at the peak."""
    if step < 0 or step >= cfg.total_steps:
        raise OutOfRangeError(f"step {step} outside [0, {cfg.total_steps})")
    if cfg.kind == "constant":
        return cfg.lr_max
    span = cfg.lr_max - cfg.lr_floor
    peak = max(1, round(cfg.warmup_fraction * (cfg.total_steps - 1)))
    if step <= peak:
        frac = step / peak
        return cfg.lr_floor + span * 0.5 * (1.0 - math.cos(math.pi * frac))
    tail = cfg.total_steps - 1 - peak
    frac = (step - peak) / max(tail, 1)
    return cfg.lr_floor + span * 0.5 * (1.0 + math.cos(math.pi * frac))
