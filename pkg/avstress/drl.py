"""
Batch policy-gradient solver: Gaussian policy, generalized advantage estimation,
and a KL-constrained trust-region step (conjugate gradient + backtracking).

The policy acts in whitened units: the simulator receives ``z * sqrt(variances)``,
so a zero-mean, unit-std policy is exactly the nominal disturbance model.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionError
from .nn import GaussianPolicy
from .simcore import Simulator, StepMeter, Trajectory, rollout

log = logging.getLogger(__name__)

BASELINE_FEATURES = ("time", "linear")


@dataclass(frozen=True)
class GaeParams:
    gamma: float = 0.99
    lam: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("drl.gae.gamma must be in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("drl.gae.lam must be in [0, 1]")


@dataclass(frozen=True)
class TrpoParams:
    kl_step: float = 0.1
    cg_iters: int = 10
    damping: float = 0.1
    backtrack_ratio: float = 0.8
    max_backtracks: int = 10
    batch_size: int = 4000

    def __post_init__(self) -> None:
        if not (self.kl_step > 0 and self.damping > 0 and self.cg_iters > 0 and self.batch_size > 0):
            raise ConfigError("drl.trpo parameters must be positive")
        if not 0.0 < self.backtrack_ratio < 1.0:
            raise ConfigError("drl.trpo.backtrack_ratio must be in (0, 1)")
        if self.max_backtracks < 1:
            raise ConfigError("drl.trpo.max_backtracks must be >= 1")


@dataclass(frozen=True)
class DrlParams:
    gae: GaeParams = field(default_factory=GaeParams)
    trpo: TrpoParams = field(default_factory=TrpoParams)
    hidden: Tuple[int, ...] = (32, 32)
    iterations: int = 400
    baseline: str = "time"
    reg_coeff: float = 1e-5
    init_log_std: float = 0.0

    def __post_init__(self) -> None:
        if self.baseline not in BASELINE_FEATURES:
            raise ConfigError(f"drl.baseline must be one of {', '.join(BASELINE_FEATURES)}")
        if self.iterations < 1:
            raise ConfigError("drl.iterations must be >= 1")
        if self.reg_coeff <= 0:
            raise ConfigError("drl.reg_coeff must be > 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class Batch:
    trajectories: List[Trajectory]
    # policy inputs (scaled states) and whitened actions, one array per trajectory
    observations: List[np.ndarray]
    policy_actions: List[np.ndarray]

    @property
    def total_steps(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.concatenate(self.observations), np.concatenate(self.policy_actions)


def collect_batch(
    sim_factory: Callable[[], Simulator],
    policy: GaussianPolicy,
    batch_size: int,
    meter: StepMeter,
    rng: np.random.Generator,
    sim: Optional[Simulator] = None,
) -> Batch:
    """Roll out sampled actions until the batch holds at least ``batch_size`` steps."""
    sim = sim or sim_factory()
    if policy.obs_dim != sim.obs_dim or policy.act_dim != sim.action_dim:
        raise DimensionError(
            f"policy is {policy.obs_dim}->{policy.act_dim}, simulator needs {sim.obs_dim}->{sim.action_dim}"
        )
    obs_scale = sim.obs_scale
    act_scale = np.sqrt(sim.action_variances)
    batch = Batch(trajectories=[], observations=[], policy_actions=[])
    steps = 0
    while steps < batch_size:
        sim.initialize()
        obs_rec: List[np.ndarray] = []
        z_rec: List[np.ndarray] = []

        def source(t: int, state: np.ndarray) -> np.ndarray:
            o = state / obs_scale
            z = policy.sample(o, rng)
            obs_rec.append(o)
            z_rec.append(z)
            return z * act_scale

        traj = rollout(sim, source, meter)
        batch.trajectories.append(traj)
        batch.observations.append(np.array(obs_rec))
        batch.policy_actions.append(np.array(z_rec))
        steps += len(traj)
    return batch


def discount_cumsum(x: Sequence[float], discount: float) -> np.ndarray:
    out = np.zeros(len(x))
    running = 0.0
    for i in range(len(x) - 1, -1, -1):
        running = x[i] + discount * running
        out[i] = running
    return out


class ValueBaseline:
    """Ridge regression of discounted returns on state (and time) features."""

    def __init__(self, features: str = "time", reg_coeff: float = 1e-5, horizon: int = 100) -> None:
        if features not in BASELINE_FEATURES:
            raise ConfigError(f"unknown baseline features {features!r}")
        self.features = features
        self.reg_coeff = reg_coeff
        self.horizon = max(int(horizon), 1)
        self.coeffs: Optional[np.ndarray] = None

    def _featurize(self, obs: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(obs)
        ones = np.ones((obs.shape[0], 1))
        if self.features == "linear":
            return np.concatenate([obs, ones], axis=1)
        t = np.arange(obs.shape[0]).reshape(-1, 1) / self.horizon
        clipped = np.clip(obs, -10.0, 10.0)
        return np.concatenate([clipped, clipped**2, t, t**2, t**3, ones], axis=1)

    def predict(self, obs: np.ndarray) -> np.ndarray:
        if self.coeffs is None:
            return np.zeros(len(obs))
        return self._featurize(obs) @ self.coeffs

    def fit(self, observations: Sequence[np.ndarray], returns: Sequence[np.ndarray]) -> List[float]:
        """
        Fit on whole trajectories. Regularization grows tenfold while the solve is
        non-finite (at most five attempts); the first finite solve is kept and earlier
        coefficients are left in place if none is. Returns the training error per attempt.
        """
        feats = np.concatenate([self._featurize(o) for o in observations])
        y = np.concatenate([np.asarray(r, dtype=np.float64) for r in returns])
        gram = feats.T @ feats
        rhs = feats.T @ y
        reg = self.reg_coeff
        errors: List[float] = []
        for _ in range(5):
            coeffs = np.linalg.lstsq(gram + reg * np.identity(gram.shape[0]), rhs, rcond=None)[0]
            if np.all(np.isfinite(coeffs)):
                self.coeffs = coeffs
                errors.append(float(np.mean((feats @ coeffs - y) ** 2)))
                break
            errors.append(math.inf)
            reg *= 10.0
        else:
            log.warning("baseline: no finite fit after %d attempts; keeping previous coefficients", len(errors))
        return errors

    def mse(self, observations: Sequence[np.ndarray], returns: Sequence[np.ndarray]) -> float:
        pred = np.concatenate([self.predict(o) for o in observations])
        y = np.concatenate([np.asarray(r, dtype=np.float64) for r in returns])
        return float(np.mean((pred - y) ** 2))


def gae_advantages(
    batch: Batch,
    baseline: ValueBaseline,
    params: GaeParams,
    normalize: bool = True,
) -> List[np.ndarray]:
    """
    delta_t = r_t + gamma * V(s_{t+1}) - V(s_t) with V = 0 after the last step,
    A_t = sum_k (gamma * lam)^k delta_{t+k}; optionally standardized over the batch.
    """
    out: List[np.ndarray] = []
    for traj, obs in zip(batch.trajectories, batch.observations):
        r = np.asarray(traj.rewards, dtype=np.float64)
        v = baseline.predict(obs)
        v_next = np.append(v[1:], 0.0)
        deltas = r + params.gamma * v_next - v
        out.append(discount_cumsum(deltas, params.gamma * params.lam))
    if normalize:
        flat = np.concatenate(out)
        mean, std = flat.mean(), flat.std()
        scale = std if std > 1e-12 else 1.0
        out = [(a - mean) / scale for a in out]
    return out


def conjugate_gradient(
    avp: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    iters: int = 10,
    residual_tol: float = 1e-10,
) -> np.ndarray:
    """Approximately solve A x = b for symmetric positive-definite A given x -> A x."""
    x = np.zeros_like(b)
    r = b.copy()
    p = b.copy()
    rr = float(r @ r)
    for _ in range(iters):
        if rr < residual_tol:
            break
        ap = avp(p)
        alpha = rr / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


@dataclass(frozen=True)
class TrpoStep:
    accepted: bool
    mean_kl: float
    surrogate_before: float
    surrogate_after: float
    backtracks: int
    reason: str = ""


def surrogate(
    policy: GaussianPolicy, obs: np.ndarray, actions: np.ndarray, advantages: np.ndarray, old_logp: np.ndarray
) -> float:
    ratio = np.exp(policy.log_prob(obs, actions) - old_logp)
    return float(np.mean(ratio * advantages))


def trpo_update(
    policy: GaussianPolicy,
    obs: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    params: TrpoParams,
) -> TrpoStep:
    """
    Maximize the importance-weighted surrogate subject to mean KL <= kl_step.
    The policy is left unchanged unless a backtracking candidate is accepted.
    """
    adv = np.asarray(advantages, dtype=np.float64)
    theta_old = policy.get_flat()
    old_mean = policy.mean(obs)
    old_log_std = policy.log_std.copy()
    old_logp = policy.log_prob(obs, actions)
    before = float(np.mean(adv))

    g = policy.grad_weighted_log_prob(obs, actions, adv) / len(adv)
    if not np.all(np.isfinite(g)):
        log.warning("trpo: non-finite policy gradient, update skipped")
        return TrpoStep(False, 0.0, before, before, 0, "non-finite gradient")
    if not np.any(g):
        return TrpoStep(False, 0.0, before, before, 0, "zero gradient")

    def fvp(v: np.ndarray) -> np.ndarray:
        return policy.fisher_vector_product(obs, v) + params.damping * v

    direction = conjugate_gradient(fvp, g, params.cg_iters)
    shs = 0.5 * float(direction @ fvp(direction))
    if not shs > 0 or not math.isfinite(shs):
        log.warning("trpo: degenerate curvature along the search direction")
        return TrpoStep(False, 0.0, before, before, 0, "degenerate curvature")
    full_step = direction * math.sqrt(params.kl_step / shs)

    for k in range(params.max_backtracks):
        policy.set_flat(theta_old + params.backtrack_ratio**k * full_step)
        kl = policy.mean_kl(obs, old_mean, old_log_std)
        after = surrogate(policy, obs, actions, adv, old_logp)
        if math.isfinite(after) and kl <= params.kl_step and after > before:
            return TrpoStep(True, kl, before, after, k)
    policy.set_flat(theta_old)
    log.warning("trpo: no step accepted after %d backtracks", params.max_backtracks)
    return TrpoStep(False, 0.0, before, before, params.max_backtracks, "line search failed")


@dataclass(frozen=True)
class CurvePoint:
    iteration: int
    mean_return: float
    best_collision_reward: Optional[float]
    cumulative_step_calls: int


@dataclass
class TrainResult:
    best: Optional[Trajectory]
    best_collision: Optional[Trajectory]
    curve: List[CurvePoint]
    steps: List[TrpoStep]
    policy: GaussianPolicy


def train(
    sim_factory: Callable[[], Simulator],
    params: DrlParams,
    meter: StepMeter,
    seed: int = 0,
    budget: Optional[int] = None,
    iterations: Optional[int] = None,
    callback: Optional[Callable[[int, StepMeter, Optional[float]], None]] = None,
) -> TrainResult:
    """collect -> fit baseline -> GAE -> TRPO, until the iteration or step budget runs out."""
    init_seq, sample_seq = np.random.SeedSequence(seed).spawn(2)
    sim = sim_factory()
    policy = GaussianPolicy(
        sim.obs_dim,
        sim.action_dim,
        hidden=params.hidden,
        rng=np.random.default_rng(init_seq),
        init_log_std=params.init_log_std,
    )
    rng = np.random.default_rng(sample_seq)
    baseline = ValueBaseline(params.baseline, params.reg_coeff, horizon=sim.reward_params.horizon)

    best: Optional[Trajectory] = None
    best_collision: Optional[Trajectory] = None
    curve: List[CurvePoint] = []
    steps: List[TrpoStep] = []
    n_iter = iterations if iterations is not None else params.iterations

    for it in range(1, n_iter + 1):
        if budget is not None and meter.count >= budget:
            break
        batch = collect_batch(sim_factory, policy, params.trpo.batch_size, meter, rng, sim=sim)
        returns = [discount_cumsum(t.rewards, params.gae.gamma) for t in batch.trajectories]
        baseline.fit(batch.observations, returns)
        adv = gae_advantages(batch, baseline, params.gae)
        obs, acts = batch.stacked()
        step = trpo_update(policy, obs, acts, np.concatenate(adv), params.trpo)
        steps.append(step)

        for traj in batch.trajectories:
            if best is None or traj.total_reward > best.total_reward:
                best = traj
            if traj.is_collision and (best_collision is None or traj.total_reward > best_collision.total_reward):
                if best_collision is None:
                    log.info("drl: first collision at iteration %d (%d step calls)", it, meter.count)
                best_collision = traj

        mean_return = float(np.mean([t.total_reward for t in batch.trajectories]))
        best_reward = best_collision.total_reward if best_collision is not None else None
        curve.append(CurvePoint(it, mean_return, best_reward, meter.count))
        log.debug(
            "drl: it %d mean return %.2f best collision %s kl %.4f calls %d",
            it,
            mean_return,
            "-" if best_reward is None else f"{best_reward:.2f}",
            step.mean_kl,
            meter.count,
        )
        if callback is not None:
            callback(it, meter, best_reward)

    return TrainResult(
        best=best_collision or best,
        best_collision=best_collision,
        curve=curve,
        steps=steps,
        policy=policy,
    )
