"""Run artifacts on disk: trajectory and learning-curve CSVs, JSON records."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .crosswalk import ACTION_BLOCK, CrosswalkSimulator, ScenarioConfig, SimulatorState
from .drl import CurvePoint
from .errors import ConfigError
from .simcore import RewardParams, reward

TRAJECTORY_COLUMNS = [
    "t", "ped_id", "x", "y", "vx", "vy",
    "ax", "ay", "eps_x", "eps_y", "eps_vx", "eps_vy",
    "veh_x", "veh_v", "reward",
]
CURVE_COLUMNS = ["iteration", "mean_return", "best_collision_reward", "cumulative_step_calls"]

# CSV action column -> offset inside a pedestrian's action block
_ACTION_OFFSETS = {"ax": 0, "ay": 1, "eps_vx": 2, "eps_vy": 3, "eps_x": 4, "eps_y": 5}


@dataclass(frozen=True)
class TraceStep:
    t: int
    # state after the step
    state: SimulatorState
    action: np.ndarray
    reward: float


def trace(scenario: ScenarioConfig, params: RewardParams, actions: Sequence[np.ndarray]) -> List[TraceStep]:
    """Replay ``actions`` and keep the full world state after every step."""
    sim = CrosswalkSimulator(scenario, params)
    sim.initialize()
    steps: List[TraceStep] = []
    for t, a in enumerate(actions):
        if sim.is_terminal():
            break
        out = sim.step(a)
        assert sim.state is not None
        steps.append(TraceStep(t=t, state=sim.state, action=np.asarray(a, dtype=np.float64), reward=reward(out, params, t)))
    return steps


def write_json(path: Path, obj: Dict[str, Any]) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_trajectory_csv(path: Path, steps: Sequence[TraceStep]) -> None:
    """One row per (step, pedestrian); floats are written at round-trip precision."""
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for s in steps:
            veh = s.state.vehicle
            for i, p in enumerate(s.state.pedestrians):
                block = s.action[i * ACTION_BLOCK : (i + 1) * ACTION_BLOCK]
                acts = [float(block[_ACTION_OFFSETS[c]]) for c in TRAJECTORY_COLUMNS[6:12]]
                w.writerow([s.t, i, p.x, p.y, p.vx, p.vy, *acts, veh.x, veh.v, s.reward])


def read_trajectory_csv(path: Path) -> Tuple[List[np.ndarray], List[float]]:
    """Recover (actions, rewards) per step from a trajectory CSV."""
    try:
        with path.open(newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
    except FileNotFoundError as e:
        raise ConfigError(f"trajectory file not found: {path}") from e
    if not rows:
        raise ConfigError(f"{path}: no trajectory rows")
    if list(rows[0].keys()) != TRAJECTORY_COLUMNS:
        raise ConfigError(f"{path}: unexpected header")

    by_step: Dict[int, Dict[int, Dict[str, str]]] = {}
    for row in rows:
        by_step.setdefault(int(row["t"]), {})[int(row["ped_id"])] = row
    n_peds = len(by_step[min(by_step)])
    actions: List[np.ndarray] = []
    rewards: List[float] = []
    for t in sorted(by_step):
        peds = by_step[t]
        if sorted(peds) != list(range(n_peds)):
            raise ConfigError(f"{path}: step {t} does not list every pedestrian")
        a = np.zeros(ACTION_BLOCK * n_peds)
        for i in range(n_peds):
            for col, off in _ACTION_OFFSETS.items():
                a[i * ACTION_BLOCK + off] = float(peds[i][col])
        actions.append(a)
        rewards.append(float(peds[0]["reward"]))
    return actions, rewards


def write_curve_csv(path: Path, points: Sequence[CurvePoint]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for p in points:
            best: Optional[float] = p.best_collision_reward
            w.writerow([p.iteration, p.mean_return, "" if best is None else best, p.cumulative_step_calls])
