"""Loss-guided soft dataset pruning with expectation rescaling.

Samples whose score (last observed loss) falls below the running mean are
pruned with probability r each epoch; survivors train with their loss
scaled by 1/(1-r) so the expected total update matches full-data training.
Pruning is disabled for the final (1-delta) fraction of epochs.
"""

__version__ = "0.1.0"

from .data import Dataset, QuadraticSet, gen_blobs, gen_quadratic, load_csv, save_csv
from .errors import (
    DataCorruptionError,
    InvalidArgumentError,
    NumericOverflowError,
    OutOfRangeError,
    SoftPruneError,
)
from .models import DenseModel, OptimizerState, ScheduleConfig, onecycle_lr
from .pruning import (
    EpochPlan,
    PrunePolicy,
    ScoreTable,
    TierSpec,
    dynamic_random_plan,
    expected_kept_fraction,
    mean_threshold,
    new_score_table,
    plan_epoch,
    prune_probabilities,
    quantile,
    reconstruct_mixup_scores,
    static_hard_plan,
    update_scores,
)
from .training import EpochMetrics, RunConfig, evaluate, train

__all__ = [
    "__version__",
    "Dataset", "QuadraticSet", "gen_blobs", "gen_quadratic", "load_csv", "save_csv",
    "DataCorruptionError", "InvalidArgumentError", "NumericOverflowError",
    "OutOfRangeError", "SoftPruneError",
    "DenseModel", "OptimizerState", "ScheduleConfig", "onecycle_lr",
    "EpochPlan", "PrunePolicy", "ScoreTable", "TierSpec",
    "dynamic_random_plan", "expected_kept_fraction", "mean_threshold",
    "new_score_table", "plan_epoch", "prune_probabilities", "quantile",
    "reconstruct_mixup_scores", "static_hard_plan", "update_scores",
    "EpochMetrics", "RunConfig", "evaluate", "train",
]
