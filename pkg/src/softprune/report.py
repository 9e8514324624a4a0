"""Render figures from a metrics JSON-Lines file.

Figures land next to the delimited output (or in an explicit directory):
training curves, pruning behavior, and the cost accounting line.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DataCorruptionError


def read_metrics(path) -> Dict[str, list]:
    """Split a run's JSONL output into (config, epoch records, summary)."""
    config, epochs, summary = None, [], None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "effective_config" in rec:
                config = rec["effective_config"]
            elif "summary" in rec:
                summary = rec["summary"]
            else:
                epochs.append(rec)
    if not epochs:
        raise DataCorruptionError(f"{path}: no epoch records")
    return {"config": config, "epochs": epochs, "summary": summary}


def render_figures(metrics_path, out_dir=None) -> List[Path]:
    """Write the three standard report figures; returns the written paths."""
    metrics_path = Path(metrics_path)
    out_dir = Path(out_dir) if out_dir is not None else metrics_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    data = read_metrics(metrics_path)
    epochs = data["epochs"]
    xs = [r["epoch"] for r in epochs]
    stem = metrics_path.stem
    written = []

    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    ax1.plot(xs, [r["mean_train_loss"] for r in epochs], color="tab:blue", label="mean train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("mean train loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(xs, [r["eval_metric"] for r in epochs], color="tab:orange", label="eval metric")
    ax2.set_ylabel("eval metric", color="tab:orange")
    ax1.set_title("Training curves")
    fig.tight_layout()
    p = out_dir / f"{stem}_curves.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    ax1.plot(xs, [r["kept_ratio"] for r in epochs], color="tab:green", drawstyle="steps-mid")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("kept ratio", color="tab:green")
    ax1.set_ylim(0.0, 1.05)
    ax2 = ax1.twinx()
    ax2.plot(xs, [r["threshold"] for r in epochs], color="tab:red")
    ax2.set_ylabel("score threshold", color="tab:red")
    ax1.set_title("Pruning behavior")
    fig.tight_layout()
    p = out_dir / f"{stem}_pruning.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(xs, [r["cumulative_sample_forwards"] for r in epochs], label="actual")
    n0 = epochs[0]["cumulative_sample_forwards"] / max(epochs[0]["kept_ratio"], 1e-12)
    ax.plot(xs, [n0 * (e + 1) for e in xs], linestyle="--", label="full-data budget")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cumulative sample forwards")
    ax.legend()
    ax.set_title("Cost accounting")
    fig.tight_layout()
    p = out_dir / f"{stem}_cost.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written
