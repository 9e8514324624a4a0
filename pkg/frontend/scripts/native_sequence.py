"""Reference driver for the cross-language equivalence test.

Runs a (create, plan, update) x EPOCHS sequence directly through the Python
library (no stdio protocol involved) and prints the resulting plans and
final scores as JSON. The TypeScript test runs the identical sequence
through the binding and compares bit-for-bit.

Usage: python3 native_sequence.py SEED
"""

import json
import sys

from softprune import PrunePolicy, new_score_table, plan_epoch, update_scores

N = 64
EPOCHS = 20


def synthetic_loss(i: int, epoch: int, seed: int) -> float:
    # integer arithmetic only, exactly reproducible in any IEEE-754 host
    return ((i * 2654435761 + epoch * 97003 + seed * 13) % 100000) / 100000


def main() -> None:
    seed = int(sys.argv[1])
    policy = PrunePolicy(kind="info_batch", r=0.5, delta=0.875, total_epochs=EPOCHS)
    table = new_score_table(N)
    plans = []
    for epoch in range(EPOCHS):
        plan = plan_epoch(table, policy, seed)
        plans.append(
            {
                "kept_ids": plan.kept_ids.tolist(),
                "weights": plan.weights.tolist(),
                "threshold": plan.threshold,
                "kept_ratio": plan.kept_ratio,
                "epoch": plan.epoch,
            }
        )
        losses = [synthetic_loss(int(i), epoch, seed) for i in plan.kept_ids]
        update_scores(table, plan, losses)
    print(json.dumps({"plans": plans, "scores": table.scores.tolist()}))


if __name__ == "__main__":
    main()
