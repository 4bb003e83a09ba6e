"""
Black-box simulator contract, the stress-testing reward, and rollout/replay.

A simulator is driven only through ``initialize``/``step``/``is_terminal``/``observe``.
Every source of randomness is carried by the environment action, so replaying an action
sequence from ``initialize`` reproduces a trajectory bit for bit.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, NonFiniteError, SimulatorContractError

# (t, observed state) -> environment action
ActionSource = Callable[[int, np.ndarray], np.ndarray]


class Outcome(str, Enum):
    COLLISION = "collision"
    HORIZON_MISS = "horizon_miss"
    # replay of a prefix that stopped short of a terminal state
    INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class TransitionOutcome:
    mahalanobis: float
    event: bool
    dist: float
    terminal: bool

    def __post_init__(self) -> None:
        if self.event and not self.terminal:
            raise SimulatorContractError("an event transition must be terminal")
        if not (self.mahalanobis >= 0.0) or not (self.dist >= 0.0):
            raise SimulatorContractError(
                f"mahalanobis and dist must be finite and >= 0 (got {self.mahalanobis}, {self.dist})"
            )


@dataclass(frozen=True)
class RewardParams:
    miss_penalty: float = -10000.0
    dist_scale: float = -1000.0
    horizon: int = 100

    def __post_init__(self) -> None:
        if not self.miss_penalty < 0:
            raise ConfigError("reward.miss_penalty must be < 0")
        if not self.dist_scale < 0:
            raise ConfigError("reward.dist_scale must be < 0")
        if int(self.horizon) < 1:
            raise ConfigError("horizon must be >= 1")


@dataclass
class StepMeter:
    """Counts simulator step calls; remembers the count at the first collision seen."""

    count: int = 0
    count_at_first_collision: Optional[int] = None

    def tick(self, n: int = 1) -> None:
        self.count += n

    def record_collision(self) -> None:
        if self.count_at_first_collision is None:
            self.count_at_first_collision = self.count

    @classmethod
    def merged(cls, meters: Sequence["StepMeter"]) -> "StepMeter":
        # Order-independent: counts add, first collision is the smallest recorded count.
        firsts = [m.count_at_first_collision for m in meters if m.count_at_first_collision is not None]
        return cls(
            count=sum(m.count for m in meters),
            count_at_first_collision=min(firsts) if firsts else None,
        )


@dataclass
class Trajectory:
    actions: List[np.ndarray]
    rewards: List[float]
    states: List[np.ndarray]
    outcome: Outcome
    outcomes: List[TransitionOutcome] = field(default_factory=list)
    unconsumed: int = 0

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def is_collision(self) -> bool:
        return self.outcome is Outcome.COLLISION

    def __len__(self) -> int:
        return len(self.actions)


class Simulator(ABC):
    """The contract every stress-tested simulator implements."""

    @property
    @abstractmethod
    def action_dim(self) -> int: ...

    @property
    @abstractmethod
    def obs_dim(self) -> int: ...

    @property
    @abstractmethod
    def elapsed(self) -> int:
        """Number of steps taken since the last initialize()."""

    @property
    def reward_params(self) -> RewardParams:
        return RewardParams()

    @property
    def action_variances(self) -> np.ndarray:
        """Diagonal covariance of the nominal, zero-mean action distribution."""
        return np.ones(self.action_dim)

    @property
    def obs_scale(self) -> np.ndarray:
        """Per-component scale a learner may divide observations by."""
        return np.ones(self.obs_dim)

    @property
    def noise_mask(self) -> np.ndarray:
        """Boolean mask of action components that are injected sensor noise."""
        return np.zeros(self.action_dim, dtype=bool)

    @abstractmethod
    def initialize(self) -> None: ...

    @abstractmethod
    def step(self, action: np.ndarray) -> TransitionOutcome: ...

    @abstractmethod
    def is_terminal(self) -> bool: ...

    @abstractmethod
    def observe(self) -> np.ndarray: ...

    @abstractmethod
    def mahalanobis(self, action: np.ndarray) -> float: ...


def check_action(action: np.ndarray, dim: int) -> np.ndarray:
    a = np.array(action, dtype=np.float64)
    if a.shape != (dim,):
        raise DimensionError(f"expected an action of shape ({dim},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("action has non-finite components")
    return a


def reward(outcome: TransitionOutcome, params: RewardParams, t: int) -> float:
    """
    Per-step reward for the transition taken at step index ``t``.

    0 on the event, a large distance-scaled penalty on a terminal miss, otherwise
    -log(1 + Mahalanobis distance of the action).
    """
    if outcome.event:
        return 0.0
    if outcome.terminal or t + 1 >= params.horizon:
        return params.miss_penalty + params.dist_scale * outcome.dist
    return -math.log1p(outcome.mahalanobis)


def _classify(outcomes: Sequence[TransitionOutcome], terminal: bool) -> Outcome:
    if outcomes and outcomes[-1].event:
        return Outcome.COLLISION
    return Outcome.HORIZON_MISS if terminal else Outcome.INCOMPLETE


def _advance(
    sim: Simulator,
    state: np.ndarray,
    action: np.ndarray,
    traj: Trajectory,
    params: RewardParams,
    meter: Optional[StepMeter],
) -> None:
    t = len(traj.actions)
    traj.states.append(state)
    outcome = sim.step(action)
    if meter is not None:
        meter.tick()
        if outcome.event:
            meter.record_collision()
    traj.actions.append(action)
    traj.outcomes.append(outcome)
    traj.rewards.append(reward(outcome, params, t))


def rollout(
    sim: Simulator,
    action_source: ActionSource,
    meter: StepMeter,
    params: Optional[RewardParams] = None,
) -> Trajectory:
    """Drive a freshly initialized simulator to a terminal state."""
    if sim.elapsed != 0:
        raise SimulatorContractError("rollout needs a freshly initialized simulator")
    params = params or sim.reward_params
    traj = Trajectory(actions=[], rewards=[], states=[], outcome=Outcome.INCOMPLETE)
    while not sim.is_terminal():
        state = sim.observe()
        action = check_action(action_source(sim.elapsed, state), sim.action_dim)
        _advance(sim, state, action, traj, params, meter)
    traj.outcome = _classify(traj.outcomes, terminal=True)
    return traj


def replay(
    sim: Simulator,
    actions: Sequence[np.ndarray],
    params: Optional[RewardParams] = None,
    meter: Optional[StepMeter] = None,
) -> Trajectory:
    """
    Re-initialize ``sim`` and apply ``actions`` in order.

    Stops at the first terminal state; actions left over are reported in ``unconsumed``.
    """
    if len(actions) == 0:
        raise ValueError("replay needs at least one action")
    params = params or sim.reward_params
    sim.initialize()
    traj = Trajectory(actions=[], rewards=[], states=[], outcome=Outcome.INCOMPLETE)
    for i, a in enumerate(actions):
        if sim.is_terminal():
            traj.unconsumed = len(actions) - i
            break
        _advance(sim, sim.observe(), check_action(a, sim.action_dim), traj, params, meter)
    traj.outcome = _classify(traj.outcomes, terminal=sim.is_terminal())
    return traj


def reward_without_noise(
    sim: Simulator,
    actions: Sequence[np.ndarray],
    params: Optional[RewardParams] = None,
) -> float:
    """
    Total reward of ``actions`` with the sensor-noise components left out of the
    likelihood term. The replay itself (and so the SUT's reaction) is unchanged.
    """
    params = params or sim.reward_params
    traj = replay(sim, actions, params=params)
    mask = sim.noise_mask
    rewards: List[float] = []
    for t, (a, out) in enumerate(zip(traj.actions, traj.outcomes)):
        quiet = replace(out, mahalanobis=sim.mahalanobis(np.where(mask, 0.0, a)))
        rewards.append(reward(quiet, params, t))
    return float(sum(rewards))
