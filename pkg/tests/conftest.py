# tests/conftest.py
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import pytest
from typer.testing import CliRunner

from avstress.crosswalk import CrosswalkSimulator
from avstress.nn import GaussianPolicy
from avstress.scenarios import load_scenario
from avstress.simcore import RewardParams, Simulator, TransitionOutcome


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


class PointSimulator(Simulator):
    """
    A point on a line pushed by the first action component; the event is reaching
    ``target``. The second component only counts as sensor noise.
    """

    def __init__(self, target: float = 3.0, horizon: int = 8, variances=(1.0, 0.25)) -> None:
        self.target = target
        self.horizon = horizon
        self._var = np.array(variances, dtype=np.float64)
        self.x: Optional[float] = None
        self.t = 0
        self.hit = False

    @property
    def action_dim(self) -> int:
        return 2

    @property
    def obs_dim(self) -> int:
        return 2

    @property
    def elapsed(self) -> int:
        return self.t

    @property
    def reward_params(self) -> RewardParams:
        return RewardParams(horizon=self.horizon)

    @property
    def action_variances(self) -> np.ndarray:
        return self._var

    @property
    def noise_mask(self) -> np.ndarray:
        return np.array([False, True])

    def initialize(self) -> None:
        self.x, self.t, self.hit = 0.0, 0, False

    def step(self, action: np.ndarray) -> TransitionOutcome:
        assert self.x is not None and not self.is_terminal()
        self.x += float(action[0])
        self.t += 1
        self.hit = self.x >= self.target
        return TransitionOutcome(
            mahalanobis=self.mahalanobis(action),
            event=self.hit,
            dist=max(self.target - self.x, 0.0),
            terminal=self.hit or self.t >= self.horizon,
        )

    def is_terminal(self) -> bool:
        return self.hit or self.t >= self.horizon

    def observe(self) -> np.ndarray:
        return np.array([self.x, self.t / self.horizon])

    def mahalanobis(self, action: np.ndarray) -> float:
        a = np.asarray(action, dtype=np.float64)
        return math.sqrt(float(np.sum(a * a / self._var)))


@pytest.fixture
def point_factory() -> Callable[..., PointSimulator]:
    return PointSimulator


@pytest.fixture
def crosswalk_sim() -> Callable[..., CrosswalkSimulator]:
    def make(scenario="1", horizon: Optional[int] = None, overrides: Optional[dict] = None) -> CrosswalkSimulator:
        return CrosswalkSimulator(load_scenario(scenario, overrides, horizon))

    return make


@pytest.fixture
def small_policy() -> GaussianPolicy:
    # 2 x 32 hidden layers
    return GaussianPolicy(5, 3, hidden=(32, 32), rng=np.random.default_rng(0), init_log_std=-0.3)


@pytest.fixture
def quiet() -> List[str]:
    # near-deterministic environment: the nominal behaviour with negligible disturbances
    return ["--set", "sigma_a_lat=1e-8", "--set", "sigma_a_lon=1e-8", "--set", "sigma_noise=1e-8"]


@dataclass(frozen=True)
class RunSandbox:
    workdir: Path
    runs_dir: Path


@pytest.fixture
def run_sandbox(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> RunSandbox:
    monkeypatch.chdir(tmp_path)
    runs_dir = tmp_path / "runs"
    runs_dir.mkdir()
    return RunSandbox(workdir=tmp_path, runs_dir=runs_dir)
