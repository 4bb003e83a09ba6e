"""
Monte Carlo tree search with progressive widening over pseudorandom-seed actions.

The simulator is a black box: a tree node is identified only by the history of seeds
that led to it. Transitions are deterministic given the seed, so only the action side
of double progressive widening is needed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionError
from .simcore import Simulator, StepMeter, Trajectory, rollout

log = logging.getLogger(__name__)

SEED_SPACE = 2**64


@dataclass(frozen=True)
class DpwParams:
    k_action: float = 1.0
    alpha_action: float = 0.5
    c: float = 100.0
    depth: int = 100
    iterations: int = 2000

    def __post_init__(self) -> None:
        if not self.k_action > 0:
            raise ConfigError("mcts.k_action must be > 0")
        if not 0.0 < self.alpha_action < 1.0:
            raise ConfigError("mcts.alpha_action must be in (0, 1)")
        if self.c < 0:
            raise ConfigError("mcts.c must be >= 0")
        if self.depth < 1 or self.iterations < 1:
            raise ConfigError("mcts.depth and mcts.iterations must be >= 1")


def _draw(seed: int, stddev: np.ndarray) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(stddev.shape[0]) * stddev


def seed_to_action(seed: int, n_pedestrians: int, variances: np.ndarray) -> np.ndarray:
    """All pedestrians' blocks come from one generator seeded with ``seed``."""
    var = np.asarray(variances, dtype=np.float64)
    if var.shape != (6 * n_pedestrians,):
        raise DimensionError(f"expected {6 * n_pedestrians} variances, got {var.shape}")
    return _draw(seed, np.sqrt(var))


@dataclass
class ActionStats:
    child: "TreeNode"
    n: int = 0
    q: float = 0.0


@dataclass(eq=False)
class TreeNode:
    key: Tuple[int, ...]
    visits: int = 0
    # visits that ended the descent here (new node, terminal node or depth cap)
    leaf_visits: int = 0
    terminal: Optional[bool] = None
    children: Dict[int, ActionStats] = field(default_factory=dict)

    def can_widen(self, params: DpwParams) -> bool:
        return len(self.children) <= params.k_action * self.visits**params.alpha_action

    def uct_select(self, c: float) -> int:
        log_n = math.log(max(self.visits, 1))

        def score(item: Tuple[int, ActionStats]) -> float:
            st = item[1]
            if st.n == 0:
                return math.inf
            return st.q + c * math.sqrt(log_n / st.n)

        return max(self.children.items(), key=score)[0]

    def walk(self):
        yield self
        for st in self.children.values():
            yield from st.child.walk()


Path = List[Tuple[TreeNode, int]]


class _TreePolicy:
    """Action source for one iteration: tree descent, then uniform random seeds."""

    def __init__(self, root: TreeNode, params: DpwParams, meta: np.random.Generator, stddev: np.ndarray) -> None:
        self.params = params
        self.meta = meta
        self.stddev = stddev
        self.node: Optional[TreeNode] = root
        self.leaf: TreeNode = root
        self.fresh: Optional[TreeNode] = None
        self.path: Path = []
        self.seeds: List[int] = []

    def _fresh_seed(self) -> int:
        return int(self.meta.integers(0, SEED_SPACE, dtype=np.uint64))

    def __call__(self, t: int, state: np.ndarray) -> np.ndarray:
        node = self.node
        if node is None:
            if self.fresh is not None:
                self.fresh.terminal = False
                self.fresh = None
            seed = self._fresh_seed()
        else:
            node.terminal = False
            if len(self.path) >= self.params.depth:
                self.node = None
                seed = self._fresh_seed()
            elif node.can_widen(self.params):
                seed = self._fresh_seed()
                child = TreeNode(key=node.key + (seed,))
                node.children[seed] = ActionStats(child=child)
                self.path.append((node, seed))
                self.node = None
                self.leaf = self.fresh = child
            else:
                seed = node.uct_select(self.params.c)
                self.path.append((node, seed))
                self.node = self.leaf = node.children[seed].child
        self.seeds.append(seed)
        return _draw(seed, self.stddev)

    def finish(self) -> None:
        # the simulator stopped without asking for another action at these nodes
        if self.fresh is not None:
            self.fresh.terminal = True
        elif self.node is not None:
            self.node.terminal = True


def backpropagate(path: Path, leaf: TreeNode, rewards: Sequence[float]) -> None:
    """Incremental-mean update of Q(s, a) with the undiscounted return from each node."""
    to_go = [0.0] * (len(rewards) + 1)
    for i in range(len(rewards) - 1, -1, -1):
        to_go[i] = rewards[i] + to_go[i + 1]
    for i, (node, seed) in enumerate(path):
        st = node.children[seed]
        node.visits += 1
        st.n += 1
        st.q += (to_go[i] - st.q) / st.n
    leaf.visits += 1
    leaf.leaf_visits += 1


@dataclass
class SearchResult:
    best: Trajectory
    best_seeds: List[int]
    root: TreeNode
    iterations: int
    # best total reward after each iteration, and that iteration's own return
    history: List[float]
    returns: List[float]
    calls: List[int]
    # best collision reward after each iteration, None until one is found
    collision_history: List[Optional[float]]


def search(
    sim_factory: Callable[[], Simulator],
    params: DpwParams,
    meter: StepMeter,
    seed: int = 0,
    budget: Optional[int] = None,
    callback: Optional[Callable[[int, StepMeter, float], None]] = None,
) -> SearchResult:
    """
    Run up to ``params.iterations`` descents (or until ``meter`` reaches ``budget``).

    Returns the highest-total-reward trajectory simulated, rollouts included.
    """
    meta = np.random.default_rng(seed)
    sim = sim_factory()
    stddev = np.sqrt(np.asarray(sim.action_variances, dtype=np.float64))
    root = TreeNode(key=())
    best: Optional[Trajectory] = None
    best_seeds: List[int] = []
    history: List[float] = []
    returns: List[float] = []
    calls: List[int] = []
    collision_history: List[Optional[float]] = []
    best_collision: Optional[float] = None

    it = 0
    while it < params.iterations and (budget is None or meter.count < budget):
        sim.initialize()
        policy = _TreePolicy(root, params, meta, stddev)
        traj = rollout(sim, policy, meter)
        policy.finish()
        backpropagate(policy.path, policy.leaf, traj.rewards)
        it += 1

        total = traj.total_reward
        if best is None or total > best.total_reward:
            if traj.is_collision and (best is None or not best.is_collision):
                log.info("mcts: first collision at iteration %d (%d step calls)", it, meter.count)
            best, best_seeds = traj, list(policy.seeds)
            log.info("mcts: new best %.3f at iteration %d", total, it)
        if traj.is_collision and (best_collision is None or total > best_collision):
            best_collision = total
        history.append(best.total_reward)
        collision_history.append(best_collision)
        returns.append(total)
        calls.append(meter.count)
        if callback is not None:
            callback(it, meter, best.total_reward)

    if best is None:
        raise RuntimeError("search ran no iterations; budget already exhausted")
    return SearchResult(
        best=best,
        best_seeds=best_seeds,
        root=root,
        iterations=it,
        history=history,
        returns=returns,
        calls=calls,
        collision_history=collision_history,
    )
