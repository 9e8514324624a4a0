"""Command-line entry points.

    softprune run    --config cfg.json --out metrics.jsonl [--seed N] [--figures DIR]
    softprune verify --suite NAME [--seed N]
    softprune bench  --n INT --trials INT
    softprune report --metrics metrics.jsonl [--out-dir DIR]
    softprune planner

``planner`` speaks newline-delimited JSON on stdin/stdout so external
training loops (and the foreign-language binding) can drive the epoch
planner without the bundled trainer.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bench_threshold_vs_sort
from .config import effective_config, load_run_config
from .errors import (
    DataCorruptionError,
    InvalidArgumentError,
    NumericOverflowError,
    OutOfRangeError,
    SoftPruneError,
)
from .pruning import ScoreTable, new_score_table, plan_epoch, update_scores
from .suites import SUITES, run_suite
from .training import train

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def cmd_run(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    metrics = train(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write(json.dumps({"effective_config": effective_config(cfg)}) + "\n")
        total_forwards = 0
        n_train = 0
        for m in metrics:
            rec = dataclasses.asdict(m)
            fh.write(json.dumps(rec) + "\n")
            total_forwards = m.cumulative_sample_forwards
            n_train = round(m.kept_count / m.kept_ratio)
        budget = n_train * cfg.epochs
        summary = {
            "final_metric": metrics[-1].eval_metric if metrics else None,
            "total_sample_forwards": total_forwards,
            "saved_fraction": 1.0 - total_forwards / budget if budget else 0.0,
        }
        fh.write(json.dumps({"summary": summary}) + "\n")
    if args.figures is not None and metrics:
        from .report import render_figures

        render_figures(out, args.figures)
    return EXIT_OK


def cmd_verify(args) -> int:
    records = run_suite(args.suite, args.seed)
    failed = 0
    for rec in records:
        print(json.dumps(rec.to_json_dict()))
        status = "PASS" if rec.passed else "FAIL"
        print(f"{status} {rec.test}: statistic={rec.statistic:.6g} threshold={rec.threshold:g}", file=sys.stderr)
        failed += not rec.passed
    return EXIT_OK if failed == 0 else EXIT_VERIFY_FAIL


def cmd_bench(args) -> int:
    res = bench_threshold_vs_sort(args.n, args.trials)
    print(f"{'operation':<12}{'median ms':>12}")
    print(f"{'mean':<12}{res.mean_ms:>12.3f}")
    print(f"{'quantile':<12}{res.quantile_ms:>12.3f}")
    print(f"{'sort':<12}{res.sort_ms:>12.3f}")
    print(f"sort/mean ratio: {res.sort_over_mean:.1f}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_figures

    for path in render_figures(args.metrics, args.out_dir):
        print(path)
    return EXIT_OK


def _planner_dispatch(state: dict, req: dict) -> dict:
    op = req.get("op")
    if op == "create":
        from .config import parse_policy

        policy = parse_policy(req.get("policy", {}))
        table = new_score_table(int(req["n"]))
        state["table"] = table
        state["policy"] = dataclasses.replace(policy, total_epochs=int(req["total_epochs"]))
        return {"ok": True, "epoch": table.epoch, "version": __version__}
    if "table" not in state:
        raise InvalidArgumentError("no planner created yet")
    table: ScoreTable = state["table"]
    if op == "plan":
        plan = plan_epoch(table, state["policy"], int(req["seed"]))
        state["last_plan"] = plan
        return {
            "ok": True,
            "kept_ids": plan.kept_ids.tolist(),
            "weights": plan.weights.tolist(),
            "threshold": plan.threshold,
            "kept_ratio": plan.kept_ratio,
            "epoch": plan.epoch,
        }
    if op == "update":
        plan = state.get("last_plan")
        if plan is None:
            raise InvalidArgumentError("update before plan")
        if req.get("kept_ids") is not None and req["kept_ids"] != plan.kept_ids.tolist():
            raise InvalidArgumentError("kept_ids do not match the last plan")
        update_scores(table, plan, np.asarray(req["losses"], dtype=np.float64))
        state["last_plan"] = None
        return {"ok": True, "epoch": table.epoch}
    if op == "scores":
        return {"ok": True, "scores": table.scores.tolist(), "epoch": table.epoch}
    if op == "close":
        state.clear()
        state["closed"] = True
        return {"ok": True}
    raise InvalidArgumentError(f"unknown planner op {op!r}")


def cmd_planner(args) -> int:
    state: dict = {}
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            if state.get("closed"):
                raise InvalidArgumentError("planner handle is closed")
            resp = _planner_dispatch(state, json.loads(line))
        except SoftPruneError as exc:
            resp = {"ok": False, "kind": type(exc).__name__, "error": str(exc)}
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            resp = {"ok": False, "kind": "InvalidArgumentError", "error": str(exc)}
        print(json.dumps(resp), flush=True)
        if resp.get("ok") and state.get("closed"):
            break
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softprune")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train under a pruning policy, emit JSONL metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--figures", default=None, help="also render report figures into this directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time mean threshold vs quantile vs sort")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render figures from a metrics file")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("planner", help="JSON-per-line planner protocol on stdio")
    p.set_defaults(func=cmd_planner)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgumentError, OutOfRangeError, DataCorruptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericOverflowError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
