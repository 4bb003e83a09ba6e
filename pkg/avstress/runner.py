"""
One stress-testing run end to end: resolve the configuration, run the chosen solver
under the step-call budget, and write the run directory.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import drl, mcts
from .artifacts import read_trajectory_csv, trace, write_curve_csv, write_json, write_trajectory_csv
from .config import Defaults, RunConfig, apply_overrides, from_dict, parse_overrides, read_json_object, to_dict
from .crosswalk import CrosswalkSimulator, ScenarioConfig
from .drl import CurvePoint, DrlParams
from .errors import ConfigError
from .hashing import artifact_manifest
from .mcts import DpwParams
from .nn import GaussianPolicy, save_checkpoint
from .output_json import build_run_json, build_summary_json
from .plotting import plot_trajectory
from .runid import new_run_id, utc_timestamp
from .scenarios import load_scenario, scenario_from_dict, scenario_to_dict
from .simcore import Outcome, RewardParams, StepMeter, Trajectory, replay, reward_without_noise
from .version import environment, installed_version

log = logging.getLogger(__name__)

# (iteration, step calls so far, best collision reward or best reward so far)
ProgressFn = Callable[[int, int, Optional[float]], None]


@dataclass(frozen=True)
class ResolvedRun:
    scenario: ScenarioConfig
    reward: RewardParams
    mcts: DpwParams
    drl: DrlParams

    def solver_params(self, solver: str) -> Dict[str, Any]:
        return to_dict(self.mcts if solver == "mcts" else self.drl)


@dataclass(frozen=True)
class RunSummary:
    scenario: str
    solver: str
    seed: int
    budget: int
    outcome: Outcome
    calls_to_step: int
    calls_at_first_collision: Optional[int]
    best_reward: float
    reward_without_noise: float
    iterations: int
    steps: int
    wall_clock_s: float

    @property
    def collided(self) -> bool:
        return self.outcome is Outcome.COLLISION


@dataclass
class RunResult:
    config: RunConfig
    resolved: ResolvedRun
    summary: RunSummary
    best: Trajectory
    curve: List[CurvePoint]
    policy: Optional[GaussianPolicy] = None
    out_dir: Optional[Path] = None


def _section(cls, base: Any, overrides: Dict[str, Any], where: str):
    return from_dict(cls, apply_overrides(to_dict(base), overrides), where)


def resolve(cfg: RunConfig) -> ResolvedRun:
    """Apply ``--set`` overrides and ``--horizon``/``--iterations`` to every parameter group."""
    ov = parse_overrides(cfg.overrides)
    scenario = load_scenario(cfg.scenario, ov["scenario"], cfg.horizon)
    horizon = scenario.horizon

    reward = _section(RewardParams, RewardParams(horizon=horizon), ov["reward"], "reward.")
    dpw = _section(DpwParams, DpwParams(depth=horizon), ov["mcts"], "mcts.")
    learner = _section(DrlParams, DrlParams(), ov["drl"], "drl.")

    if cfg.horizon is not None:
        reward = replace(reward, horizon=cfg.horizon)
        dpw = replace(dpw, depth=cfg.horizon)
    if cfg.iterations is not None:
        dpw = replace(dpw, iterations=cfg.iterations)
        learner = replace(learner, iterations=cfg.iterations)
    return ResolvedRun(scenario=scenario, reward=reward, mcts=dpw, drl=learner)


def execute(cfg: RunConfig, resolved: Optional[ResolvedRun] = None, progress: Optional[ProgressFn] = None) -> RunResult:
    resolved = resolved or resolve(cfg)
    scenario, params = resolved.scenario, resolved.reward

    def factory() -> CrosswalkSimulator:
        return CrosswalkSimulator(scenario, params)

    def callback(it: int, meter: StepMeter, best: Optional[float]) -> None:
        if progress is not None:
            progress(it, meter.count, best)

    log.info("run: %s with %s, seed %d, budget %d step calls", scenario.name, cfg.solver, cfg.seed, cfg.budget)
    meter = StepMeter()
    policy: Optional[GaussianPolicy] = None
    start = time.perf_counter()
    if cfg.solver == "mcts":
        res = mcts.search(factory, resolved.mcts, meter, seed=cfg.seed, budget=cfg.budget, callback=callback)
        best = res.best
        iterations = res.iterations
        curve = [
            CurvePoint(i + 1, ret, coll, calls)
            for i, (ret, coll, calls) in enumerate(zip(res.returns, res.collision_history, res.calls))
        ]
    else:
        out = drl.train(factory, resolved.drl, meter, seed=cfg.seed, budget=cfg.budget, callback=callback)
        if out.best is None:
            raise RuntimeError("training ran no iterations; budget already exhausted")
        best, curve, policy = out.best, out.curve, out.policy
        iterations = len(out.curve)
    wall = time.perf_counter() - start

    quiet = reward_without_noise(factory(), best.actions, params)
    summary = RunSummary(
        scenario=scenario.name,
        solver=cfg.solver,
        seed=cfg.seed,
        budget=cfg.budget,
        outcome=best.outcome,
        calls_to_step=meter.count,
        calls_at_first_collision=meter.count_at_first_collision,
        best_reward=best.total_reward,
        reward_without_noise=quiet,
        iterations=iterations,
        steps=len(best),
        wall_clock_s=wall,
    )
    if summary.collided:
        log.info(
            "run: collision, reward %.3f (%.3f without noise), first found after %d step calls",
            summary.best_reward,
            summary.reward_without_noise,
            summary.calls_at_first_collision,
        )
    else:
        log.info("run: no collision within %d step calls", meter.count)
    return RunResult(config=cfg, resolved=resolved, summary=summary, best=best, curve=curve, policy=policy)


def summary_dict(result: RunResult) -> Dict[str, Any]:
    s, r = result.summary, result.resolved
    return build_summary_json(
        scenario=s.scenario,
        solver=s.solver,
        seed=s.seed,
        budget=s.budget,
        outcome=s.outcome.value,
        calls_total=s.calls_to_step,
        calls_at_first_collision=s.calls_at_first_collision,
        reward=s.best_reward,
        reward_without_noise=s.reward_without_noise,
        iterations=s.iterations,
        steps=s.steps,
        config={
            "scenario": scenario_to_dict(r.scenario),
            "reward": to_dict(r.reward),
            "solver": r.solver_params(s.solver),
        },
    )


def default_out_dir(result: RunResult) -> Path:
    label = f"{result.summary.scenario}-{result.summary.solver}"
    return Path(Defaults.runs_dir_name) / new_run_id(label)


def write_run(result: RunResult, out_dir: Optional[Path] = None) -> Path:
    """Write every artifact, then ``run.json`` with their sha256 manifest."""
    out = out_dir or default_out_dir(result)
    out.mkdir(parents=True, exist_ok=True)
    d = Defaults()
    s = result.summary

    steps = trace(result.resolved.scenario, result.resolved.reward, result.best.actions)
    write_trajectory_csv(out / d.trajectory_file_name, steps)
    write_curve_csv(out / d.curve_file_name, result.curve)
    write_json(out / d.summary_file_name, summary_dict(result))
    plot_trajectory(result.resolved.scenario, steps, s.collided, out / d.plot_file_name)
    names = [d.trajectory_file_name, d.curve_file_name, d.summary_file_name, d.plot_file_name]
    if result.policy is not None:
        save_checkpoint(result.policy, out / d.policy_file_name)
        names.append(d.policy_file_name)

    cfg = result.config
    record = build_run_json(
        run_id=out.name,
        timestamp=utc_timestamp(),
        version=installed_version(),
        environment=environment(),
        wall_clock_s=s.wall_clock_s,
        command={
            "scenario": cfg.scenario,
            "solver": cfg.solver,
            "seed": cfg.seed,
            "budget": cfg.budget,
            "horizon": cfg.horizon,
            "iterations": cfg.iterations,
            "overrides": list(cfg.overrides),
        },
        artifacts=artifact_manifest(out, names),
    )
    write_json(out / d.run_file_name, record)
    result.out_dir = out
    log.debug("run: artifacts written to %s", out)
    return out


@dataclass(frozen=True)
class SweepAggregate:
    runs: int
    collisions: int
    mean_calls_at_first_collision: Optional[float]
    best_reward: float

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.runs if self.runs else 0.0

    @property
    def scaled_calls(self) -> Optional[float]:
        # mean calls multiplied by the number of runs
        if self.mean_calls_at_first_collision is None:
            return None
        return self.mean_calls_at_first_collision * self.runs


def aggregate(summaries: List[RunSummary]) -> SweepAggregate:
    if not summaries:
        raise ConfigError("nothing to aggregate")
    firsts = [s.calls_at_first_collision for s in summaries if s.calls_at_first_collision is not None]
    return SweepAggregate(
        runs=len(summaries),
        collisions=sum(1 for s in summaries if s.collided),
        mean_calls_at_first_collision=float(np.mean(firsts)) if firsts else None,
        best_reward=max(s.best_reward for s in summaries),
    )


def sweep(
    cfg: RunConfig,
    n_runs: int,
    out_root: Path,
    progress: Optional[Callable[[int, int, int, Optional[float]], None]] = None,
) -> Tuple[List[RunResult], SweepAggregate]:
    """Run ``n_runs`` consecutive meta-seeds starting at ``cfg.seed``; one sub-directory per seed."""
    if n_runs < 1:
        raise ConfigError("sweep needs at least one run")
    resolved = resolve(cfg)
    results: List[RunResult] = []
    for k in range(n_runs):
        seed = cfg.seed + k
        run_cfg = replace(cfg, seed=seed)
        cb: Optional[ProgressFn] = None
        if progress is not None:
            cb = lambda it, calls, best, _k=k: progress(_k, it, calls, best)  # noqa: E731
        res = execute(run_cfg, resolved, cb)
        write_run(res, out_root / f"seed-{seed}")
        results.append(res)
    return results, aggregate([r.summary for r in results])


@dataclass(frozen=True)
class ReplayCheck:
    matches: bool
    steps: int
    mismatched_steps: List[int]
    recorded_total: float
    replayed_total: float
    outcome: Outcome
    message: str = ""


def verify_run(run_dir: Path) -> ReplayCheck:
    """Replay a run directory's trajectory CSV and compare every reward exactly."""
    d = Defaults()
    summary = read_json_object(run_dir / d.summary_file_name)
    config = summary.get("config")
    if not isinstance(config, dict) or "scenario" not in config or "reward" not in config:
        raise ConfigError(f"{run_dir / d.summary_file_name}: missing scenario/reward config")
    scenario = scenario_from_dict(config["scenario"])
    params = from_dict(RewardParams, config["reward"], "reward.")
    actions, recorded = read_trajectory_csv(run_dir / d.trajectory_file_name)

    traj = replay(CrosswalkSimulator(scenario, params), actions, params=params)
    mismatched = [t for t, (a, b) in enumerate(zip(recorded, traj.rewards)) if a != b]
    message = ""
    if len(traj.rewards) != len(recorded):
        message = f"replay produced {len(traj.rewards)} steps, trajectory has {len(recorded)}"
    elif traj.outcome.value != summary.get("outcome"):
        message = f"replay outcome {traj.outcome.value} differs from recorded {summary.get('outcome')}"
    elif mismatched:
        message = f"{len(mismatched)} step reward(s) differ"
    return ReplayCheck(
        matches=not message,
        steps=len(traj.rewards),
        mismatched_steps=mismatched,
        recorded_total=float(sum(recorded)),
        replayed_total=traj.total_reward,
        outcome=traj.outcome,
        message=message,
    )
