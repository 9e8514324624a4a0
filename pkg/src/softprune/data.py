"""Synthetic dataset generators, CSV ingestion, and batching.

All generators are pure functions of their parameters and seed. CSV is the
only file format; features are written with repr-precision so a round trip
is bit-identical.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DataCorruptionError, InvalidArgumentError
from .pruning import _philox


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    kind: str  # "classification" | "regression"
    provenance: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def num_classes(self) -> int:
        if self.kind != "classification":
            raise InvalidArgumentError("num_classes on a regression dataset")
        return int(self.labels.max()) + 1


@dataclass
class QuadraticSet:
    """Per-sample convex quadratics L_i(theta) = 1/2 * sum_j a_ij (theta_j - b_ij)^2.

    Closed-form per-sample gradients make this the oracle family for the
    bias/variance harness.
    """

    a: np.ndarray  # (n, d), strictly positive
    b: np.ndarray  # (n, d)

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        self.b = np.atleast_2d(np.asarray(self.b, dtype=np.float64))
        if self.a.shape != self.b.shape:
            raise InvalidArgumentError("a and b must have identical shapes")
        if (self.a <= 0).any():
            raise InvalidArgumentError("all curvatures a_i must be > 0")

    @property
    def size(self) -> int:
        return self.a.shape[0]

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    def per_sample_losses(self, theta: np.ndarray) -> np.ndarray:
        d = np.asarray(theta, dtype=np.float64) - self.b
        return 0.5 * (self.a * d * d).sum(axis=1)

    def per_sample_gradients(self, theta: np.ndarray) -> np.ndarray:
        return self.a * (np.asarray(theta, dtype=np.float64) - self.b)


def gen_blobs(
    classes: int,
    per_class: int,
    dim: int,
    separation: float,
    noise: float,
    seed: int,
) -> Dataset:
    """Gaussian clusters at seeded centers with pairwise distance >= separation."""
    if classes < 2 or per_class < 1 or dim < 1:
        raise InvalidArgumentError("need classes >= 2, per_class >= 1, dim >= 1")
    if separation <= 0 or noise < 0:
        raise InvalidArgumentError("need separation > 0 and noise >= 0")
    rng = _philox(seed, 0)
    centers = rng.normal(size=(classes, dim))
    dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    min_dist = dists[~np.eye(classes, dtype=bool)].min()
    centers *= separation / min_dist
    labels = np.repeat(np.arange(classes), per_class)
    features = centers[labels] + noise * rng.normal(size=(classes * per_class, dim))
    return Dataset(
        features=features,
        labels=labels,
        kind="classification",
        provenance={
            "generator": "blobs",
            "classes": classes,
            "per_class": per_class,
            "dim": dim,
            "separation": separation,
            "noise": noise,
            "seed": seed,
        },
    )


def gen_quadratic(
    n: int,
    a_range: Sequence[float],
    b_range: Sequence[float],
    seed: int,
    dim: int = 1,
) -> QuadraticSet:
    """Seeded quadratic family with curvatures in a_range, targets in b_range."""
    if n < 1 or dim < 1:
        raise InvalidArgumentError("need n >= 1 and dim >= 1")
    lo_a, hi_a = a_range
    if lo_a <= 0 or hi_a < lo_a:
        raise InvalidArgumentError("a_range must be positive and ordered")
    lo_b, hi_b = b_range
    if hi_b < lo_b:
        raise InvalidArgumentError("b_range must be ordered")
    rng = _philox(seed, 1)
    a = rng.uniform(lo_a, hi_a, size=(n, dim))
    b = rng.uniform(lo_b, hi_b, size=(n, dim))
    return QuadraticSet(a=a, b=b)


def save_csv(dataset: Dataset, path) -> None:
    """Write features and label with repr precision (lossless round trip)."""
    path = Path(path)
    d = dataset.features.shape[1]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(d)] + ["y"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(label.item())])


def load_csv(path, feature_columns: Sequence[str], label_column: str, label_kind: str) -> Dataset:
    """Parse a header-first CSV into a Dataset; records a content digest."""
    path = Path(path)
    if label_kind not in ("classification", "regression"):
        raise InvalidArgumentError(f"unknown label kind {label_kind!r}")
    raw = path.read_bytes()
    if not raw.strip():
        raise DataCorruptionError(f"{path}: empty file")
    digest = hashlib.sha256(raw).hexdigest()
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    header = rows[0]
    col_idx: Dict[str, int] = {name: i for i, name in enumerate(header)}
    for col in list(feature_columns) + [label_column]:
        if col not in col_idx:
            raise DataCorruptionError(f"{path}: missing column {col!r}")
    if len(rows) < 2:
        raise DataCorruptionError(f"{path}: no data rows")

    n = len(rows) - 1
    features = np.empty((n, len(feature_columns)))
    labels: List = []
    for r, row in enumerate(rows[1:], start=2):
        for j, col in enumerate(feature_columns):
            cell = row[col_idx[col]]
            try:
                features[r - 2, j] = float(cell)
            except ValueError:
                raise DataCorruptionError(
                    f"{path}: unparsable cell {cell!r} at row {r}, column {col}"
                ) from None
        cell = row[col_idx[label_column]]
        try:
            labels.append(int(cell) if label_kind == "classification" else float(cell))
        except ValueError:
            raise DataCorruptionError(
                f"{path}: unparsable cell {cell!r} at row {r}, column {label_column}"
            ) from None
    labels_arr = np.asarray(labels)
    return Dataset(
        features=features,
        labels=labels_arr,
        kind=label_kind,
        provenance={"path": str(path), "sha256": digest},
    )


def standardize(dataset: Dataset) -> Dataset:
    """Zero-mean unit-variance features; the flag lands in provenance."""
    mu = dataset.features.mean(axis=0)
    sd = dataset.features.std(axis=0)
    sd[sd == 0.0] = 1.0
    return Dataset(
        features=(dataset.features - mu) / sd,
        labels=dataset.labels,
        kind=dataset.kind,
        provenance={**dataset.provenance, "standardized": True},
    )


def batches(kept_ids: np.ndarray, batch_size: int, seed: int, epoch: int = 0) -> List[np.ndarray]:
    """Seeded permutation of kept_ids chunked into ceil(|kept|/B) batches."""
    if batch_size < 1:
        raise InvalidArgumentError("batch_size must be >= 1")
    ids = np.asarray(kept_ids)
    perm = _philox(seed ^ 0x9E3779B97F4A7C15, epoch).permutation(ids)
    return [perm[i : i + batch_size] for i in range(0, len(perm), batch_size)]
