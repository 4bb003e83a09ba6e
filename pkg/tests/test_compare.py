# tests/test_compare.py
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import pytest

from avstress.cli import app
from avstress.compare import COMPARE_COLUMNS, compare_rows, load_summaries, rows_to_csv
from avstress.errors import ConfigError
from avstress.output_json import build_summary_json


def _write_summary(run_dir: Path, solver: str, seed: int, first: Optional[int], reward: float) -> Path:
    run_dir.mkdir(parents=True)
    obj = build_summary_json(
        scenario="scenario-1",
        solver=solver,
        seed=seed,
        budget=2_000_000,
        outcome="collision" if first is not None else "horizon_miss",
        calls_total=50_000,
        calls_at_first_collision=first,
        reward=reward,
        reward_without_noise=reward + 1.0,
        iterations=10,
        steps=42,
        config={},
    )
    (run_dir / "summary.json").write_text(json.dumps(obj), encoding="utf-8")
    return run_dir


@pytest.fixture
def two_runs(tmp_path: Path) -> List[str]:
    a = _write_summary(tmp_path / "mcts-0", "mcts", 0, 1234, -55.5)
    b = _write_summary(tmp_path / "drl-0", "drl", 0, None, -12000.25)
    return [str(a), str(b / "summary.json")]


def test_load_summaries_accepts_dirs_and_files(two_runs):
    loaded = load_summaries(two_runs)
    assert [s.data["solver"] for s in loaded] == ["mcts", "drl"]


def test_load_summaries_needs_two(two_runs):
    with pytest.raises(ConfigError):
        load_summaries(two_runs[:1])
    with pytest.raises(ConfigError):
        load_summaries([])


def test_load_summaries_rejects_other_json(tmp_path: Path, two_runs):
    other = tmp_path / "other.json"
    other.write_text('{"hello": 1}', encoding="utf-8")
    with pytest.raises(ConfigError, match="not a run summary"):
        load_summaries([two_runs[0], str(other)])


def test_rows_to_csv_blank_for_missing(two_runs):
    text = rows_to_csv(compare_rows(load_summaries(two_runs)))
    lines = text.splitlines()
    assert lines[0] == ",".join(COMPARE_COLUMNS)
    assert lines[1].endswith(",mcts,0,collision,50000,1234,-55.5,-54.5")
    assert lines[2].endswith(",drl,0,horizon_miss,50000,,-12000.25,-11999.25")


def test_compare_cli_csv(runner, two_runs, tmp_path: Path):
    csv_path = tmp_path / "table.csv"
    res = runner.invoke(app, ["compare", *two_runs, "--format", "csv", "--csv", str(csv_path)])
    assert res.exit_code == 0, res.output
    assert ",".join(COMPARE_COLUMNS) in res.stdout
    assert csv_path.read_text(encoding="utf-8").splitlines()[0] == ",".join(COMPARE_COLUMNS)


def test_compare_cli_json(runner, two_runs):
    res = runner.invoke(app, ["compare", *two_runs, "--format", "json"])
    assert res.exit_code == 0, res.output
    obj = json.loads(res.stdout)
    assert obj["count"] == 2
    assert obj["rows"][0]["calls_at_first_collision"] == 1234
    assert obj["rows"][1]["calls_at_first_collision"] is None


def test_compare_cli_text(runner, two_runs):
    res = runner.invoke(app, ["compare", *two_runs])
    assert res.exit_code == 0, res.output
    assert "Stress-test results" in res.output


def test_compare_cli_same_run_twice(runner, two_runs):
    res = runner.invoke(app, ["compare", two_runs[0], two_runs[0], "--format", "json"])
    assert res.exit_code == 0, res.output
    assert json.loads(res.stdout)["count"] == 2


def test_compare_cli_errors(runner, two_runs, tmp_path: Path):
    assert runner.invoke(app, ["compare"]).exit_code == 1
    assert runner.invoke(app, ["compare", two_runs[0]]).exit_code == 1
    assert runner.invoke(app, ["compare", two_runs[0], str(tmp_path / "missing")]).exit_code == 1
    assert runner.invoke(app, ["compare", *two_runs, "--format", "xml"]).exit_code != 0
