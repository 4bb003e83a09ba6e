# tests/test_cli.py
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict, List

import pytest

from avstress.cli import app


def _json_out(text: str) -> Dict[str, Any]:
    # log records may share the captured stream
    return json.loads(text[text.index("{") : text.rindex("}") + 1])


def _summary(run_dir: Path) -> Dict[str, Any]:
    return json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))


def _run(runner, out: Path, *extra: str):
    return runner.invoke(app, ["run", "--out", str(out), *extra])


def test_run_nominal_collision_writes_artifacts(runner, tmp_path: Path, quiet: List[str]):
    out = tmp_path / "s2"
    res = _run(runner, out, "--scenario", "2", "--iterations", "3", *quiet)
    assert res.exit_code == 0, res.output
    for name in ("summary.json", "run.json", "trajectory.csv", "learning_curve.csv", "trajectory.svg"):
        assert (out / name).is_file(), name
    assert not (out / "policy.bin").exists()

    s = _summary(out)
    assert s["outcome"] == "collision"
    assert s["solver"] == "mcts"
    assert s["iterations"] == 3
    assert s["calls_to_step"]["at_first_collision"] <= s["calls_to_step"]["total"]
    assert s["config"]["reward"]["horizon"] == 100

    record = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert set(record["artifacts"]) == {"summary.json", "trajectory.csv", "learning_curve.csv", "trajectory.svg"}
    assert "wall_clock_s" not in s and "wall_clock_s" in record


def test_run_nominal_scenario_1_misses(runner, tmp_path: Path, quiet: List[str]):
    out = tmp_path / "s1"
    res = _run(runner, out, "--scenario", "1", "--iterations", "2", *quiet)
    assert res.exit_code == 2, res.output
    s = _summary(out)
    assert s["outcome"] == "horizon_miss"
    assert s["calls_to_step"]["at_first_collision"] is None
    assert s["reward"] < -10000.0


def test_run_json_format_matches_summary_file(runner, tmp_path: Path, quiet: List[str]):
    out = tmp_path / "j"
    res = _run(runner, out, "--scenario", "2", "--iterations", "2", "--format", "json", *quiet)
    assert res.exit_code == 0, res.output
    assert _json_out(res.stdout) == _summary(out)


def test_run_defaults_to_runs_dir(runner, run_sandbox, quiet: List[str]):
    res = runner.invoke(app, ["run", "--scenario", "2", "--iterations", "1", *quiet])
    assert res.exit_code == 0, res.output
    (run_dir,) = list(run_sandbox.runs_dir.iterdir())
    assert "scenario-2-mcts" in run_dir.name
    assert (run_dir / "summary.json").is_file()


def test_run_is_deterministic(runner, tmp_path: Path):
    args = ["--scenario", "2", "--iterations", "5", "--seed", "7"]
    assert _run(runner, tmp_path / "a", *args).exit_code in (0, 2)
    assert _run(runner, tmp_path / "b", *args).exit_code in (0, 2)
    for name in ("summary.json", "trajectory.csv", "learning_curve.csv", "trajectory.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_run_stops_at_budget(runner, tmp_path: Path):
    out = tmp_path / "budget"
    res = _run(runner, out, "--scenario", "1", "--budget", "1000")
    assert res.exit_code in (0, 2), res.output
    total = _summary(out)["calls_to_step"]["total"]
    # one more descent may start just below the budget
    assert 1000 <= total < 1100


def test_run_drl_writes_policy(runner, tmp_path: Path):
    out = tmp_path / "drl"
    res = _run(
        runner, out, "--scenario", "2", "--solver", "drl", "--iterations", "1", "--set", "drl.trpo.batch_size=200"
    )
    assert res.exit_code in (0, 2), res.output
    assert (out / "policy.bin").is_file()
    with (out / "learning_curve.csv").open(newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["iteration", "mean_return", "best_collision_reward", "cumulative_step_calls"]
    assert len(rows) == 2
    assert int(rows[1][3]) >= 200
    s = _summary(out)
    assert s["config"]["solver"]["trpo"]["batch_size"] == 200


@pytest.mark.parametrize(
    "args",
    [
        ["--scenario", "9"],
        ["--solver", "foo"],
        ["--budget", "0"],
        ["--set", "idm.b_max"],
        ["--set", "idm.nope=1"],
        ["--set", "mcts.alpha_action=2"],
        ["--horizon", "0"],
    ],
)
def test_run_config_errors_exit_1(runner, tmp_path: Path, args: List[str]):
    res = _run(runner, tmp_path / "x", *args)
    assert res.exit_code == 1, res.output
    assert "error" in res.output
    assert not (tmp_path / "x").exists()


def test_run_rejects_unknown_format(runner, tmp_path: Path):
    res = _run(runner, tmp_path / "x", "--format", "yaml")
    assert res.exit_code != 0
    assert "format" in res.output


def test_run_scenario_from_json_file(runner, tmp_path: Path, quiet: List[str]):
    cfg = tmp_path / "early.json"
    cfg.write_text(
        json.dumps({"pedestrians": [{"vx": 0.0, "vy": 1.4, "x": 0.0, "y": -4.0}], "horizon": 60}),
        encoding="utf-8",
    )
    out = tmp_path / "custom"
    res = _run(runner, out, "--scenario", str(cfg), "--iterations", "1", *quiet)
    assert res.exit_code in (0, 2), res.output
    s = _summary(out)
    assert s["scenario"] == "early"
    assert s["config"]["reward"]["horizon"] == 60
    assert s["config"]["solver"]["depth"] == 60


def test_replay_matches_recorded_run(runner, tmp_path: Path):
    out = tmp_path / "r"
    assert _run(runner, out, "--scenario", "2", "--iterations", "4", "--seed", "3").exit_code in (0, 2)
    res = runner.invoke(app, ["replay", str(out)])
    assert res.exit_code == 0, res.output
    assert "Replay matches" in res.output


def test_replay_detects_tampered_reward(runner, tmp_path: Path):
    out = tmp_path / "r"
    assert _run(runner, out, "--scenario", "2", "--iterations", "2").exit_code in (0, 2)
    path = out / "trajectory.csv"
    with path.open(newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    rows[1][-1] = repr(float(rows[1][-1]) - 0.5)
    with path.open("w", newline="", encoding="utf-8") as f:
        csv.writer(f, lineterminator="\n").writerows(rows)

    res = runner.invoke(app, ["replay", str(out)])
    assert res.exit_code == 1
    assert "mismatch" in res.output


def test_replay_missing_run_dir(runner, tmp_path: Path):
    res = runner.invoke(app, ["replay", str(tmp_path / "nope")])
    assert res.exit_code == 1
    assert "not found" in res.output


def test_sweep_writes_one_dir_per_seed(runner, tmp_path: Path, quiet: List[str]):
    root = tmp_path / "sw"
    res = runner.invoke(
        app, ["sweep", "--runs", "2", "--scenario", "2", "--iterations", "1", "--seed", "4", "--out", str(root), *quiet]
    )
    assert res.exit_code == 0, res.output
    assert sorted(p.name for p in root.iterdir()) == ["seed-4", "seed-5"]
    assert [_summary(root / f"seed-{k}")["seed"] for k in (4, 5)] == [4, 5]
    assert "Collision rate: 1.00" in res.output


def test_version(runner):
    res = runner.invoke(app, ["version"])
    assert res.exit_code == 0
    assert res.output.strip()
    verbose = runner.invoke(app, ["version", "-v"])
    assert "numpy" in verbose.output
