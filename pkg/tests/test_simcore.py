# tests/test_simcore.py
from __future__ import annotations

import math

import numpy as np
import pytest

from avstress.errors import ConfigError, DimensionError, NonFiniteError, SimulatorContractError
from avstress.simcore import (
    Outcome,
    RewardParams,
    StepMeter,
    TransitionOutcome,
    check_action,
    replay,
    reward,
    reward_without_noise,
    rollout,
)


def _zeros(dim):
    return lambda t, s: np.zeros(dim)


def test_reward_branches_exact():
    rng = np.random.default_rng(3)
    p = RewardParams()
    for _ in range(1000):
        m = float(rng.exponential(5.0))
        d = float(rng.uniform(0.0, 40.0))
        t = int(rng.integers(0, 99))
        assert reward(TransitionOutcome(m, True, d, True), p, t) == 0.0
        assert reward(TransitionOutcome(m, False, d, True), p, t) == -10000.0 - 1000.0 * d
        got = reward(TransitionOutcome(m, False, d, False), p, t)
        assert abs(got - (-math.log(1.0 + m))) <= 1e-12


def test_reward_last_step_counts_as_miss():
    p = RewardParams(horizon=10)
    out = TransitionOutcome(1.0, False, 2.0, False)
    assert reward(out, p, 9) == -10000.0 - 2000.0
    assert reward(out, p, 8) == -math.log1p(1.0)


def test_transition_outcome_invariants():
    with pytest.raises(SimulatorContractError):
        TransitionOutcome(0.0, True, 0.0, False)
    with pytest.raises(SimulatorContractError):
        TransitionOutcome(-1.0, False, 0.0, False)
    with pytest.raises(SimulatorContractError):
        TransitionOutcome(float("nan"), False, 0.0, False)


def test_reward_params_validated():
    with pytest.raises(ConfigError):
        RewardParams(miss_penalty=0.0)
    with pytest.raises(ConfigError):
        RewardParams(dist_scale=1.0)
    with pytest.raises(ConfigError):
        RewardParams(horizon=0)


def test_check_action():
    assert check_action([1, 2], 2).dtype == np.float64
    with pytest.raises(DimensionError):
        check_action(np.zeros(3), 2)
    with pytest.raises(NonFiniteError):
        check_action([0.0, float("inf")], 2)


def test_step_meter_merge_is_order_independent():
    a = StepMeter(count=500, count_at_first_collision=120)
    b = StepMeter(count=300, count_at_first_collision=80)
    c = StepMeter(count=50)
    for meters in ([a, b, c], [c, b, a], [b, a, c]):
        m = StepMeter.merged(meters)
        assert m.count == 850
        assert m.count_at_first_collision == 80
    assert StepMeter.merged([c]).count_at_first_collision is None


def test_step_meter_counts_first_collision_once():
    m = StepMeter()
    m.tick(3)
    m.record_collision()
    m.tick(2)
    m.record_collision()
    assert (m.count, m.count_at_first_collision) == (5, 3)


def test_rollout_collision_and_meter(point_factory):
    sim = point_factory(target=3.0, horizon=8)
    sim.initialize()
    meter = StepMeter()
    traj = rollout(sim, lambda t, s: np.array([1.0, 0.0]), meter)
    assert traj.outcome is Outcome.COLLISION
    assert len(traj) == 3 == len(traj.rewards) == meter.count
    assert traj.rewards[-1] == 0.0
    assert meter.count_at_first_collision == 3
    assert traj.total_reward == sum(traj.rewards)


def test_rollout_horizon_miss(point_factory):
    sim = point_factory(target=3.0, horizon=4)
    sim.initialize()
    traj = rollout(sim, _zeros(2), StepMeter())
    assert traj.outcome is Outcome.HORIZON_MISS
    assert len(traj) == 4
    assert traj.rewards[-1] == -10000.0 - 3000.0
    assert traj.rewards[:-1] == [0.0, 0.0, 0.0]


def test_rollout_requires_fresh_simulator(point_factory):
    sim = point_factory()
    sim.initialize()
    sim.step(np.zeros(2))
    with pytest.raises(SimulatorContractError):
        rollout(sim, _zeros(2), StepMeter())


def test_rollout_rejects_bad_actions(point_factory):
    sim = point_factory()
    sim.initialize()
    with pytest.raises(DimensionError):
        rollout(sim, _zeros(3), StepMeter())


def test_replay_stops_at_terminal_and_reports_leftovers(point_factory):
    sim = point_factory(target=2.0, horizon=8)
    actions = [np.array([1.0, 0.0])] * 5
    traj = replay(sim, actions)
    assert traj.outcome is Outcome.COLLISION
    assert len(traj) == 2
    assert traj.unconsumed == 3


def test_replay_prefix_is_incomplete(point_factory):
    traj = replay(point_factory(horizon=8), [np.zeros(2)] * 3)
    assert traj.outcome is Outcome.INCOMPLETE


def test_replay_empty_rejected(point_factory):
    with pytest.raises(ValueError):
        replay(point_factory(), [])


def test_replay_is_bitwise_deterministic(crosswalk_sim):
    rng = np.random.default_rng(11)
    for scenario in ("1", "2", "3"):
        sim = crosswalk_sim(scenario)
        sd = np.sqrt(sim.action_variances)
        for _ in range(20):
            actions = [rng.standard_normal(sim.action_dim) * sd for _ in range(100)]
            a = replay(sim, actions)
            b = replay(sim, actions)
            assert a.rewards == b.rewards
            assert all(np.array_equal(x, y) for x, y in zip(a.states, b.states))
            assert a.outcome is b.outcome


def test_rollout_then_replay_reproduces_rewards(crosswalk_sim):
    sim = crosswalk_sim("2")
    sim.initialize()
    rng = np.random.default_rng(5)
    sd = np.sqrt(sim.action_variances)
    traj = rollout(sim, lambda t, s: rng.standard_normal(sim.action_dim) * sd, StepMeter())
    again = replay(sim, traj.actions)
    assert again.rewards == traj.rewards
    assert again.total_reward == traj.total_reward


def test_reward_without_noise_not_lower(point_factory):
    sim = point_factory(target=3.0, horizon=8)
    actions = [np.array([1.0, 0.7]), np.array([1.0, -0.4]), np.array([1.0, 0.2])]
    full = replay(sim, actions).total_reward
    quiet = reward_without_noise(sim, actions)
    assert quiet >= full
    # only the first component remains in the likelihood term
    expected = -2.0 * math.log1p(1.0) + 0.0
    assert quiet == pytest.approx(expected)
