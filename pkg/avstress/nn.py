"""
Small tanh MLPs and a diagonal Gaussian policy with hand-derived gradients.

Parameters are flattened in a fixed order: for each layer W (in x out) then b,
and for a policy the mean network followed by ``log_std``.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DimensionError

LOG_2PI = math.log(2.0 * math.pi)
CHECKPOINT_MAGIC = b"AVSP"
CHECKPOINT_VERSION = 1


def _orthogonal(shape: Tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((rows, cols) if rows >= cols else (cols, rows))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Mlp:
    """Affine layers with tanh between them; the output layer is linear."""

    def __init__(
        self,
        sizes: Sequence[int],
        rng: Optional[np.random.Generator] = None,
        hidden_gain: float = 1.0,
        out_gain: float = 0.01,
    ) -> None:
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ConfigError(f"invalid layer sizes {list(sizes)}")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        last = len(self.sizes) - 2
        self.weights: List[np.ndarray] = [
            _orthogonal((i, o), out_gain if k == last else hidden_gain, rng)
            for k, (i, o) in enumerate(zip(self.sizes[:-1], self.sizes[1:]))
        ]
        self.biases: List[np.ndarray] = [np.zeros(o) for o in self.sizes[1:]]

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "Mlp":
        net = cls(sizes)
        net.weights = [np.zeros_like(w) for w in net.weights]
        return net

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for w, b in zip(self.weights, self.biases) for p in (w, b)])

    def unflatten(self, flat: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got {flat.shape}")
        ws, bs, i = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(flat[i : i + w.size].reshape(w.shape))
            i += w.size
            bs.append(flat[i : i + b.size].copy())
            i += b.size
        return ws, bs

    def set_flat(self, flat: np.ndarray) -> None:
        ws, bs = self.unflatten(flat)
        self.weights = [w.copy() for w in ws]
        self.biases = bs

    def _as_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        x2 = x.reshape(1, -1) if x.ndim == 1 else x
        if x2.ndim != 2 or x2.shape[1] != self.sizes[0]:
            raise DimensionError(f"expected input dim {self.sizes[0]}, got shape {x.shape}")
        return x2

    def _activations(self, x2: np.ndarray) -> List[np.ndarray]:
        acts = [x2]
        h = x2
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if k == last else np.tanh(z)
            acts.append(h)
        return acts

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = self._activations(self._as_batch(x))[-1]
        return out[0] if x.ndim == 1 else out

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Vector-Jacobian product summed over the batch.

        Returns (flat parameter gradient, gradient w.r.t. the input).
        """
        x2 = self._as_batch(x)
        acts = self._activations(x2)
        g = np.asarray(grad_out, dtype=np.float64).reshape(acts[-1].shape)
        grads_w: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        grads_b: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            h_in = acts[k]
            grads_w[k] = h_in.T @ g
            grads_b[k] = g.sum(axis=0)
            g = g @ self.weights[k].T
            if k > 0:
                g = g * (1.0 - h_in * h_in)
        flat = np.concatenate([p.ravel() for w, b in zip(grads_w, grads_b) for p in (w, b)])
        return flat, g

    def jvp(self, x: np.ndarray, dparams: np.ndarray) -> np.ndarray:
        """Directional derivative of the output along the flat parameter direction ``dparams``."""
        dws, dbs = self.unflatten(dparams)
        h = self._as_batch(x)
        dh = np.zeros_like(h)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            dz = dh @ w + h @ dws[k] + dbs[k]
            if k == last:
                return dz
            h = np.tanh(z)
            dh = (1.0 - h * h) * dz
        raise AssertionError("unreachable")


def kl_diag_gaussian(
    mean_old: np.ndarray, log_std_old: np.ndarray, mean_new: np.ndarray, log_std_new: np.ndarray
) -> np.ndarray:
    """KL(old || new) between diagonal Gaussians, summed over the last axis."""
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    diff = mean_old - mean_new
    terms = log_std_new - log_std_old + (var_old + diff * diff) / (2.0 * var_new) - 0.5
    return np.sum(terms, axis=-1)


class GaussianPolicy:
    """N(mean_net(s), diag(exp(2 * log_std))) with a state-independent log_std."""

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        hidden: Sequence[int] = (32, 32),
        rng: Optional[np.random.Generator] = None,
        init_log_std: float = 0.0,
    ) -> None:
        self.mean_net = Mlp([obs_dim, *hidden, act_dim], rng=rng)
        self.log_std = np.full(act_dim, float(init_log_std))

    @property
    def obs_dim(self) -> int:
        return self.mean_net.sizes[0]

    @property
    def act_dim(self) -> int:
        return self.mean_net.sizes[-1]

    @property
    def n_params(self) -> int:
        return self.mean_net.n_params + self.act_dim

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.mean_net.get_flat(), self.log_std])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got {flat.shape}")
        k = self.mean_net.n_params
        self.mean_net.set_flat(flat[:k])
        self.log_std = flat[k:].copy()

    def mean(self, states: np.ndarray) -> np.ndarray:
        return self.mean_net.forward(states)

    def log_prob(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        mu = self.mean(states)
        z = (np.asarray(actions, dtype=np.float64) - mu) * np.exp(-self.log_std)
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(self.log_std) - 0.5 * self.act_dim * LOG_2PI

    def grad_weighted_log_prob(self, states: np.ndarray, actions: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_i w_i * grad log pi(a_i | s_i) as a flat parameter vector."""
        states = np.atleast_2d(states)
        actions = np.atleast_2d(actions)
        w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
        mu = self.mean(states)
        inv_var = np.exp(-2.0 * self.log_std)
        diff = actions - mu
        net_grad, _ = self.mean_net.backward(states, w * diff * inv_var)
        std_grad = np.sum(w * (diff * diff * inv_var - 1.0), axis=0)
        return np.concatenate([net_grad, std_grad])

    def grad_log_prob(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        return self.grad_weighted_log_prob(state, action, np.ones(1))

    def sample(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(state)
        return mu + np.exp(self.log_std) * rng.standard_normal(mu.shape)

    def mean_kl(self, states: np.ndarray, old_mean: np.ndarray, old_log_std: np.ndarray) -> float:
        """Mean over states of KL(old || self)."""
        kl = kl_diag_gaussian(old_mean, old_log_std, self.mean(states), self.log_std)
        return float(np.mean(kl))

    def grad_mean_kl(self, states: np.ndarray, old_mean: np.ndarray, old_log_std: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        n = states.shape[0]
        mu = self.mean(states)
        var_new = np.exp(2.0 * self.log_std)
        diff = mu - old_mean
        net_grad, _ = self.mean_net.backward(states, diff / var_new / n)
        var_old = np.exp(2.0 * old_log_std)
        std_grad = np.mean(1.0 - (var_old + diff * diff) / var_new, axis=0)
        return np.concatenate([net_grad, std_grad])

    def fisher_vector_product(self, states: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Hessian of the mean KL at the current parameters, times ``v``."""
        states = np.atleast_2d(states)
        k = self.mean_net.n_params
        v_net, v_std = v[:k], v[k:]
        dmu = self.mean_net.jvp(states, v_net)
        inv_var = np.exp(-2.0 * self.log_std)
        net_part, _ = self.mean_net.backward(states, dmu * inv_var / states.shape[0])
        return np.concatenate([net_part, 2.0 * v_std])


def save_checkpoint(policy: GaussianPolicy, path: Path) -> None:
    """
    Layout (little-endian): b"AVSP", uint32 version, uint32 n, n x uint32 layer sizes,
    then float64 parameters in flat order (mean network, then log_std).
    """
    sizes = policy.mean_net.sizes
    header = CHECKPOINT_MAGIC + np.array([CHECKPOINT_VERSION, len(sizes), *sizes], dtype="<u4").tobytes()
    path.write_bytes(header + policy.get_flat().astype("<f8").tobytes())


def load_checkpoint(path: Path) -> GaussianPolicy:
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path} is not a policy checkpoint")
    version, n = (int(x) for x in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    offset = 12 + 4 * n
    if n < 2 or len(raw) < offset:
        raise ConfigError(f"{path}: truncated checkpoint header")
    sizes = [int(s) for s in np.frombuffer(raw, dtype="<u4", count=n, offset=12)]
    policy = GaussianPolicy(sizes[0], sizes[-1], hidden=sizes[1:-1])
    if len(raw) - offset != 8 * policy.n_params:
        raise ConfigError(f"{path}: expected {policy.n_params} parameters, found {(len(raw) - offset) / 8:g}")
    policy.set_flat(np.frombuffer(raw, dtype="<f8", offset=offset).astype(np.float64))
    return policy
