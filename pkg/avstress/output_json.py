from __future__ import annotations

from typing import Any, Dict, List, Optional

SUMMARY_VERSION = 1


def build_summary_json(
    *,
    scenario: str,
    solver: str,
    seed: int,
    budget: int,
    outcome: str,
    calls_total: int,
    calls_at_first_collision: Optional[int],
    reward: float,
    reward_without_noise: float,
    iterations: int,
    steps: int,
    config: Dict[str, Any],
) -> Dict[str, Any]:
    return {
        "version": SUMMARY_VERSION,
        "scenario": scenario,
        "solver": solver,
        "seed": seed,
        "budget": budget,
        "outcome": outcome,
        "calls_to_step": {
            "total": calls_total,
            "at_first_collision": calls_at_first_collision,
        },
        "reward": reward,
        "reward_without_noise": reward_without_noise,
        "iterations": iterations,
        "steps": steps,
        "config": config,
    }


def build_run_json(
    *,
    run_id: str,
    timestamp: str,
    version: str,
    environment: Dict[str, str],
    wall_clock_s: float,
    command: Dict[str, Any],
    artifacts: Dict[str, dict],
) -> Dict[str, Any]:
    return {
        "version": 1,
        "run_id": run_id,
        "timestamp": timestamp,
        "avstress_version": version,
        "environment": environment,
        "wall_clock_s": wall_clock_s,
        "command": command,
        "artifacts": artifacts,
    }


def compare_row(source: str, summary: Dict[str, Any]) -> Dict[str, Any]:
    calls = summary.get("calls_to_step") or {}
    return {
        "source": source,
        "scenario": summary.get("scenario", ""),
        "solver": summary.get("solver", ""),
        "seed": summary.get("seed"),
        "outcome": summary.get("outcome", ""),
        "calls_total": calls.get("total"),
        "calls_at_first_collision": calls.get("at_first_collision"),
        "reward": summary.get("reward"),
        "reward_without_noise": summary.get("reward_without_noise"),
    }


def build_compare_json(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    return {"rows": rows, "count": len(rows)}
