"""
Crosswalk world: pedestrians driven by the environment action, a noisy sensor,
an alpha-beta tracker, and a vehicle running a modified Intelligent Driver Model.

Coordinates: origin at the crosswalk's vertical axis and the bottom lane's center line,
x along the direction of travel, y towards the far side of the street. SI units.

Per-pedestrian action block: [a_x, a_y, eps_vx, eps_vy, eps_x, eps_y].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DimensionError, SimulatorContractError
from .simcore import RewardParams, Simulator, TransitionOutcome, check_action

ACTION_BLOCK = 6
STATE_BLOCK = 4


@dataclass(frozen=True)
class PedestrianState:
    vx: float
    vy: float
    x: float
    y: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.vx, self.vy, self.x, self.y)):
            raise ConfigError("pedestrian state must be finite")


@dataclass(frozen=True)
class Measurement:
    vx: float
    vy: float
    x: float
    y: float


@dataclass(frozen=True)
class VehicleState:
    x: float = -35.0
    y: float = 0.0
    v: float = 11.17
    length: float = 4.5
    width: float = 1.8

    def __post_init__(self) -> None:
        if self.v < 0:
            raise ConfigError("vehicle speed must be >= 0")
        if self.length <= 0 or self.width <= 0:
            raise ConfigError("vehicle length and width must be > 0")

    @property
    def front(self) -> float:
        return self.x + 0.5 * self.length


@dataclass(frozen=True)
class Track:
    x: float
    y: float
    vx: float
    vy: float


@dataclass(frozen=True)
class TrackerState:
    tracks: Tuple[Track, ...]
    alpha: float = 0.85
    beta: float = 0.005

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("tracker alpha must be in (0, 1]")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError("tracker beta must be in [0, 1)")

    @classmethod
    def from_measurements(
        cls, measurements: Sequence[Measurement], alpha: float = 0.85, beta: float = 0.005
    ) -> "TrackerState":
        return cls(
            tracks=tuple(Track(x=m.x, y=m.y, vx=m.vx, vy=m.vy) for m in measurements),
            alpha=alpha,
            beta=beta,
        )


@dataclass(frozen=True)
class RoadGeometry:
    lane_width: float = 3.7
    lanes: int = 2
    crosswalk_half_width: float = 1.5

    def __post_init__(self) -> None:
        if self.lane_width <= 0 or self.lanes < 1 or self.crosswalk_half_width <= 0:
            raise ConfigError("road geometry must be positive")

    @property
    def y_min(self) -> float:
        return -0.5 * self.lane_width

    @property
    def y_max(self) -> float:
        return self.y_min + self.lanes * self.lane_width

    @property
    def width(self) -> float:
        return self.lanes * self.lane_width


@dataclass(frozen=True)
class IdmParams:
    v0: float = 11.17
    t_headway: float = 1.5
    s0: float = 2.0
    a_max: float = 2.0
    b: float = 2.0
    delta: float = 4.0
    b_max: float = 2.5

    def __post_init__(self) -> None:
        for name in ("v0", "t_headway", "a_max", "b", "delta", "b_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"idm.{name} must be > 0")
        if self.s0 < 0:
            raise ConfigError("idm.s0 must be >= 0")


@dataclass(frozen=True)
class SutObservation:
    v_oth: float
    s_headway: float
    target: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    pedestrians: Tuple[PedestrianState, ...]
    vehicle: VehicleState = field(default_factory=VehicleState)
    dt: float = 0.1
    horizon: int = 100
    sigma_a_lat: float = 0.01
    sigma_a_lon: float = 0.1
    sigma_noise: float = 0.1
    road: RoadGeometry = field(default_factory=RoadGeometry)
    idm: IdmParams = field(default_factory=IdmParams)
    tracker_alpha: float = 0.85
    tracker_beta: float = 0.005
    pedestrian_radius: float = 0.3
    sensing_margin: float = 0.0
    name: str = "custom"

    def __post_init__(self) -> None:
        if len(self.pedestrians) < 1:
            raise ConfigError("a scenario needs at least one pedestrian")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if int(self.horizon) < 1:
            raise ConfigError("horizon must be >= 1")
        for name in ("sigma_a_lat", "sigma_a_lon", "sigma_noise"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.pedestrian_radius < 0 or self.sensing_margin < 0:
            raise ConfigError("pedestrian_radius and sensing_margin must be >= 0")
        # validates alpha/beta ranges
        TrackerState(tracks=(), alpha=self.tracker_alpha, beta=self.tracker_beta)

    @property
    def n_pedestrians(self) -> int:
        return len(self.pedestrians)

    @property
    def action_dim(self) -> int:
        return ACTION_BLOCK * self.n_pedestrians

    def variances(self) -> np.ndarray:
        """Diagonal of the action covariance. a_x is lateral, a_y longitudinal."""
        block = [self.sigma_a_lat, self.sigma_a_lon] + [self.sigma_noise] * 4
        return np.array(block * self.n_pedestrians, dtype=np.float64)


@dataclass(frozen=True)
class SimulatorState:
    pedestrians: Tuple[PedestrianState, ...]
    vehicle: VehicleState
    tracker: TrackerState
    measurements: Tuple[Measurement, ...]
    elapsed: int = 0
    collided: bool = False


SCENARIOS = {
    1: (PedestrianState(vx=0.0, vy=1.4, x=0.0, y=-2.0),),
    2: (PedestrianState(vx=0.0, vy=1.4, x=0.0, y=-4.0),),
    3: (
        PedestrianState(vx=0.0, vy=1.4, x=0.0, y=-2.0),
        PedestrianState(vx=0.0, vy=-1.4, x=0.0, y=5.0),
    ),
}


def preset(scenario_id: int) -> ScenarioConfig:
    if scenario_id not in SCENARIOS:
        raise ConfigError(f"unknown scenario id {scenario_id!r}; choose one of {sorted(SCENARIOS)}")
    return ScenarioConfig(pedestrians=SCENARIOS[scenario_id], name=f"scenario-{scenario_id}")


def initialize_scenario(scenario: Union[int, ScenarioConfig]) -> SimulatorState:
    cfg = scenario if isinstance(scenario, ScenarioConfig) else preset(scenario)
    measurements = tuple(Measurement(vx=p.vx, vy=p.vy, x=p.x, y=p.y) for p in cfg.pedestrians)
    return SimulatorState(
        pedestrians=tuple(cfg.pedestrians),
        vehicle=cfg.vehicle,
        tracker=TrackerState.from_measurements(measurements, cfg.tracker_alpha, cfg.tracker_beta),
        measurements=measurements,
    )


def pedestrian_step(p: PedestrianState, a_x: float, a_y: float, dt: float) -> PedestrianState:
    vx = p.vx + a_x * dt
    vy = p.vy + a_y * dt
    return PedestrianState(vx=vx, vy=vy, x=p.x + vx * dt, y=p.y + vy * dt)


def sense(
    pedestrians: Sequence[PedestrianState], noise: Sequence[Sequence[float]]
) -> Tuple[Measurement, ...]:
    """Add one [eps_vx, eps_vy, eps_x, eps_y] block to each pedestrian's true state."""
    if len(noise) != len(pedestrians):
        raise DimensionError("one noise block per pedestrian is required")
    return tuple(
        Measurement(vx=p.vx + e[0], vy=p.vy + e[1], x=p.x + e[2], y=p.y + e[3])
        for p, e in zip(pedestrians, noise)
    )


def tracker_step(t: TrackerState, measurements: Sequence[Measurement], dt: float) -> TrackerState:
    """One alpha-beta update per pedestrian and axis, driven by the position channel."""
    a, g = t.alpha, t.beta / dt
    tracks = []
    for tr, m in zip(t.tracks, measurements):
        xp = tr.x + tr.vx * dt
        yp = tr.y + tr.vy * dt
        rx = m.x - xp
        ry = m.y - yp
        tracks.append(Track(x=xp + a * rx, y=yp + a * ry, vx=tr.vx + g * rx, vy=tr.vy + g * ry))
    return TrackerState(tracks=tuple(tracks), alpha=t.alpha, beta=t.beta)


def select_target(
    tracks: Sequence[Track],
    vehicle: VehicleState,
    road: RoadGeometry,
    margin: float = 0.0,
) -> Optional[SutObservation]:
    """Nearest tracked pedestrian that is inside the road and ahead of the front bumper."""
    lo, hi = road.y_min - margin, road.y_max + margin
    front = vehicle.front
    best: Optional[SutObservation] = None
    for i, tr in enumerate(tracks):
        if not (lo <= tr.y <= hi) or tr.x <= front:
            continue
        headway = tr.x - front
        if best is None or headway < best.s_headway:
            best = SutObservation(v_oth=vehicle.v - tr.vx, s_headway=headway, target=i)
    return best


def idm_accel(obs: Optional[SutObservation], v: float, params: IdmParams) -> float:
    p = params
    free = (v / p.v0) ** p.delta
    if obs is None:
        acc = p.a_max * (1.0 - free)
    else:
        if obs.s_headway <= 0:
            return -p.b_max
        dynamic = v * p.t_headway + v * obs.v_oth / (2.0 * math.sqrt(p.a_max * p.b))
        s_star = p.s0 + max(0.0, dynamic)
        acc = p.a_max * (1.0 - free - (s_star / obs.s_headway) ** 2)
    return min(p.a_max, max(-p.b_max, acc))


def vehicle_step(veh: VehicleState, accel: float, dt: float) -> VehicleState:
    v = max(0.0, veh.v + accel * dt)
    return VehicleState(x=veh.x + v * dt, y=veh.y, v=v, length=veh.length, width=veh.width)


def collision_check(veh: VehicleState, pedestrians: Sequence[PedestrianState], radius: float = 0.3) -> bool:
    half_l = 0.5 * veh.length + radius
    half_w = 0.5 * veh.width + radius
    return any(abs(p.x - veh.x) <= half_l and abs(p.y - veh.y) <= half_w for p in pedestrians)


def nearest_distance(veh: VehicleState, pedestrians: Sequence[PedestrianState]) -> float:
    return min(math.hypot(p.x - veh.x, p.y - veh.y) for p in pedestrians)


def mahalanobis(action: np.ndarray, variances: np.ndarray) -> float:
    """Mahalanobis distance of ``action`` from the zero mean under a diagonal covariance."""
    a = np.asarray(action, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a / variances)))


def sim_step(
    cfg: ScenarioConfig,
    state: SimulatorState,
    action: np.ndarray,
    variances: Optional[np.ndarray] = None,
) -> Tuple[SimulatorState, TransitionOutcome]:
    """Pedestrians -> sensor -> tracker -> target selection -> IDM -> vehicle -> collision."""
    if state.collided or state.elapsed >= cfg.horizon:
        raise SimulatorContractError("step called on a terminal state")
    a = check_action(action, cfg.action_dim)
    vals = a.tolist()
    blocks = [vals[i : i + ACTION_BLOCK] for i in range(0, len(vals), ACTION_BLOCK)]

    peds = tuple(pedestrian_step(p, b[0], b[1], cfg.dt) for p, b in zip(state.pedestrians, blocks))
    meas = sense(peds, [b[2:] for b in blocks])
    tracker = tracker_step(state.tracker, meas, cfg.dt)
    target = select_target(tracker.tracks, state.vehicle, cfg.road, cfg.sensing_margin)
    accel = idm_accel(target, state.vehicle.v, cfg.idm)
    vehicle = vehicle_step(state.vehicle, accel, cfg.dt)
    event = collision_check(vehicle, peds, cfg.pedestrian_radius)

    elapsed = state.elapsed + 1
    outcome = TransitionOutcome(
        mahalanobis=mahalanobis(a, cfg.variances() if variances is None else variances),
        event=event,
        dist=nearest_distance(vehicle, peds),
        terminal=event or elapsed >= cfg.horizon,
    )
    nxt = SimulatorState(
        pedestrians=peds,
        vehicle=vehicle,
        tracker=tracker,
        measurements=meas,
        elapsed=elapsed,
        collided=event,
    )
    return nxt, outcome


class CrosswalkSimulator(Simulator):
    def __init__(self, config: ScenarioConfig, reward_params: Optional[RewardParams] = None) -> None:
        self.config = config
        self._reward = reward_params or RewardParams(horizon=config.horizon)
        self._variances = config.variances()
        self._noise = np.array(
            [False, False, True, True, True, True] * config.n_pedestrians, dtype=bool
        )
        self.state: Optional[SimulatorState] = None

    @property
    def action_dim(self) -> int:
        return self.config.action_dim

    @property
    def obs_dim(self) -> int:
        return STATE_BLOCK * self.config.n_pedestrians

    @property
    def elapsed(self) -> int:
        return 0 if self.state is None else self.state.elapsed

    @property
    def reward_params(self) -> RewardParams:
        return self._reward

    @property
    def action_variances(self) -> np.ndarray:
        return self._variances

    @property
    def obs_scale(self) -> np.ndarray:
        block = [self.config.idm.v0, 2.0, 20.0, self.config.road.width]
        return np.array(block * self.config.n_pedestrians, dtype=np.float64)

    @property
    def noise_mask(self) -> np.ndarray:
        return self._noise

    def initialize(self) -> None:
        self.state = initialize_scenario(self.config)

    def _require_state(self) -> SimulatorState:
        if self.state is None:
            raise SimulatorContractError("initialize() must be called first")
        return self.state

    def step(self, action: np.ndarray) -> TransitionOutcome:
        if self.is_terminal():
            raise SimulatorContractError("step called after the simulation reached a terminal state")
        self.state, outcome = sim_step(self.config, self._require_state(), action, self._variances)
        return outcome

    def is_terminal(self) -> bool:
        s = self._require_state()
        return s.collided or s.elapsed >= self.config.horizon

    def observe(self) -> np.ndarray:
        """Per pedestrian: velocity and position relative to the vehicle."""
        s = self._require_state()
        veh = s.vehicle
        out = []
        for p in s.pedestrians:
            out.extend((p.vx - veh.v, p.vy, p.x - veh.x, p.y - veh.y))
        return np.array(out, dtype=np.float64)

    def mahalanobis(self, action: np.ndarray) -> float:
        return mahalanobis(action, self._variances)
