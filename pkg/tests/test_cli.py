import json
import subprocess
import sys

import pytest

from softprune.cli import main

RUN_CONFIG = {
    "dataset": {
        "generator": "blobs", "classes": 2, "per_class": 100, "dim": 2,
        "separation": 4.0, "noise": 1.0, "seed": 42,
    },
    "model": {"kind": "logistic_regression", "layer_sizes": [2, 2]},
    "policy": {"kind": "info_batch", "r": 0.5, "delta": 0.875},
    "epochs": 5,
    "batch_size": 32,
    "optimizer": {"lr_max": 0.1},
    "seed": 0,
}


def _write_config(tmp_path, cfg=None):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg if cfg is not None else RUN_CONFIG))
    return path


class TestRun:
    def test_emits_config_epochs_summary(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        out = tmp_path / "metrics.jsonl"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert "effective_config" in lines[0]
        assert "summary" in lines[-1]
        epochs = lines[1:-1]
        assert len(epochs) == 5
        assert epochs[0]["epoch"] == 0 and epochs[0]["kept_ratio"] == 1.0
        summary = lines[-1]["summary"]
        assert summary["total_sample_forwards"] == epochs[-1]["cumulative_sample_forwards"]
        assert 0.0 <= summary["saved_fraction"] < 1.0

    def test_seed_flag_overrides_config(self, tmp_path):
        def stripped(path):
            recs = [json.loads(l) for l in path.read_text().splitlines()]
            for r in recs:
                r.pop("wall_ms", None)
            return recs

        cfg = _write_config(tmp_path)
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["run", "--config", str(cfg), "--out", str(out_a), "--seed", "7"])
        main(["run", "--config", str(cfg), "--out", str(out_b), "--seed", "7"])
        assert stripped(out_a) == stripped(out_b)
        out_c = tmp_path / "c.jsonl"
        main(["run", "--config", str(cfg), "--out", str(out_c), "--seed", "8"])
        assert stripped(out_a) != stripped(out_c)

    def test_figures_rendered_next_to_metrics(self, tmp_path):
        cfg = _write_config(tmp_path)
        out = tmp_path / "metrics.jsonl"
        figdir = tmp_path / "figs"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--figures", str(figdir)]) == 0
        pngs = sorted(p.name for p in figdir.glob("*.png"))
        assert pngs == ["metrics_cost.png", "metrics_curves.png", "metrics_pruning.png"]
        for p in figdir.glob("*.png"):
            assert p.stat().st_size > 1000

    def test_invalid_policy_value_names_key_path(self, tmp_path, capsys):
        bad = dict(RUN_CONFIG, policy={"kind": "info_batch", "r": 1.5, "delta": 0.875})
        cfg = _write_config(tmp_path, bad)
        code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "m.jsonl")])
        assert code == 2
        assert "policy.r" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        bad = dict(RUN_CONFIG, tyop=1)
        cfg = _write_config(tmp_path, bad)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "m.jsonl")]) == 2
        assert "tyop" in capsys.readouterr().err


class TestVerify:
    def test_passing_suite_exit_zero(self, capsys):
        assert main(["verify", "--suite", "annealing"]) == 0
        out, err = capsys.readouterr()
        records = [json.loads(l) for l in out.splitlines()]
        assert records and all(r["pass"] is True for r in records)
        assert "PASS" in err

    def test_records_have_statistic_and_threshold(self, capsys):
        main(["verify", "--suite", "annealing"])
        records = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        for r in records:
            assert {"test", "pass", "statistic", "threshold"} <= set(r)

    def test_unknown_suite_rejected_by_argparse(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--suite", "nope"])
        assert exc.value.code == 2


class TestBench:
    def test_prints_table_and_ratio(self, capsys):
        assert main(["bench", "--n", "100000", "--trials", "3"]) == 0
        out = capsys.readouterr().out
        assert "sort/mean ratio" in out
        assert "quantile" in out


class TestReport:
    def test_renders_from_existing_metrics(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        out = tmp_path / "metrics.jsonl"
        main(["run", "--config", str(cfg), "--out", str(out)])
        assert main(["report", "--metrics", str(out), "--out-dir", str(tmp_path / "r")]) == 0
        printed = capsys.readouterr().out.splitlines()
        assert len(printed) == 3
        for line in printed:
            assert line.endswith(".png")


class TestPlannerProtocol:
    def _session(self, requests):
        proc = subprocess.run(
            [sys.executable, "-m", "softprune", "planner"],
            input="\n".join(json.dumps(r) for r in requests) + "\n",
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0, proc.stderr
        return [json.loads(l) for l in proc.stdout.splitlines()]

    def test_full_session(self):
        create = {
            "op": "create", "n": 8, "total_epochs": 10,
            "policy": {"kind": "info_batch", "r": 0.5, "delta": 0.875},
        }
        resp = self._session([
            create,
            {"op": "plan", "seed": 0},
            {"op": "update", "losses": [0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6]},
            {"op": "plan", "seed": 0},
            {"op": "scores"},
            {"op": "close"},
        ])
        assert all(r["ok"] for r in resp)
        assert resp[1]["kept_ids"] == list(range(8))  # fresh scores: keep all
        assert resp[2]["epoch"] == 1
        assert resp[3]["epoch"] == 1
        assert set(resp[3]["kept_ids"]) <= set(range(8))
        assert resp[4]["scores"] == [0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6]

    def test_update_before_plan_is_error(self):
        create = {
            "op": "create", "n": 4, "total_epochs": 5,
            "policy": {"kind": "info_batch", "r": 0.5, "delta": 0.875},
        }
        resp = self._session([create, {"op": "update", "losses": [1, 2, 3, 4]}, {"op": "close"}])
        assert resp[1]["ok"] is False
        assert resp[1]["kind"] == "InvalidArgumentError"

    def test_ops_after_close_rejected(self):
        resp = self._session([
            {"op": "create", "n": 2, "total_epochs": 2, "policy": {"kind": "none"}},
            {"op": "close"},
        ])
        assert resp[-1]["ok"] is True
        # a fresh process: close terminates the session loop
        assert len(resp) == 2

    def test_malformed_json_is_soft_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "softprune", "planner"],
            input="not json\n" + json.dumps({"op": "close"}) + "\n",
            capture_output=True, text=True, timeout=60,
        )
        lines = [json.loads(l) for l in proc.stdout.splitlines()]
        assert lines[0]["ok"] is False

    def test_deterministic_plans_across_processes(self):
        create = {
            "op": "create", "n": 64, "total_epochs": 10,
            "policy": {"kind": "info_batch", "r": 0.5, "delta": 0.875},
        }
        seq = [
            create,
            {"op": "plan", "seed": 3},
            {"op": "update", "losses": [float(i % 7) / 7 for i in range(64)]},
            {"op": "plan", "seed": 3},
            {"op": "close"},
        ]
        assert self._session(seq) == self._session(seq)


class TestVersion:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
