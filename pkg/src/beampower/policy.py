"""MLP Gaussian policy with a shared-trunk value head, in plain numpy.

The trunk is ``n_layers`` blocks of affine -> ReLU -> layer norm. Two
linear heads sit on top: the action mean (one entry per beam) and a
scalar state value. The action log-stddev is a free parameter vector,
independent of the state.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

LN_EPS = 1e-5
LOG_2PI = float(np.log(2.0 * np.pi))
CHECKPOINT_VERSION = 1


@dataclass
class PolicyParams:
    """Named parameter arrays; order of ``arrays`` is the flattening order."""

    arrays: dict
    n_beams: int
    hidden: int
    n_layers: int

    @property
    def n_inputs(self) -> int:
        return 5 * self.n_beams

    def names(self):
        return list(self.arrays)

    def copy(self) -> "PolicyParams":
        return PolicyParams({k: v.copy() for k, v in self.arrays.items()},
                            self.n_beams, self.hidden, self.n_layers)

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays.values()])

    def with_flat(self, vec: np.ndarray) -> "PolicyParams":
        out, i = {}, 0
        for k, v in self.arrays.items():
            out[k] = np.asarray(vec[i:i + v.size], dtype=float).reshape(v.shape).copy()
            i += v.size
        if i != vec.size:
            raise ValueError(f"flat vector has {vec.size} entries, expected {i}")
        return PolicyParams(out, self.n_beams, self.hidden, self.n_layers)


def flatten_grads(params: PolicyParams, grads: dict) -> np.ndarray:
    return np.concatenate([grads[k].ravel() for k in params.arrays])


@dataclass(frozen=True)
class DiagGaussian:
    mean: np.ndarray
    log_std: np.ndarray

    @property
    def std(self):
        return np.exp(self.log_std)


def _orthogonal(rng, n_in, n_out, gain):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def init_policy(n_beams: int, rng: np.random.Generator, hidden: int | None = None,
                n_layers: int = 4) -> PolicyParams:
    hidden = 15 * n_beams if hidden is None else hidden
    n_in = 5 * n_beams
    arrays = {}
    width = n_in
    for i in range(n_layers):
        arrays[f"w{i}"] = _orthogonal(rng, width, hidden, np.sqrt(2.0))
        arrays[f"b{i}"] = np.zeros(hidden)
        arrays[f"g{i}"] = np.ones(hidden)
        arrays[f"o{i}"] = np.zeros(hidden)
        width = hidden
    arrays["w_mu"] = _orthogonal(rng, hidden, n_beams, 0.01)
    arrays["b_mu"] = np.zeros(n_beams)
    arrays["log_std"] = np.zeros(n_beams)
    arrays["w_v"] = _orthogonal(rng, hidden, 1, 1.0)[:, 0]
    arrays["b_v"] = np.zeros(1)
    return PolicyParams(arrays, n_beams, hidden, n_layers)


def _forward(params: PolicyParams, x: np.ndarray):
    a = params.arrays
    h = x
    cache = []
    for i in range(params.n_layers):
        z = h @ a[f"w{i}"] + a[f"b{i}"]
        r = np.maximum(z, 0.0)
        mu = r.mean(axis=-1, keepdims=True)
        sigma = np.sqrt(r.var(axis=-1, keepdims=True) + LN_EPS)
        xhat = (r - mu) / sigma
        cache.append((h, z, xhat, sigma))
        h = a[f"g{i}"] * xhat + a[f"o{i}"]
    mean = h @ a["w_mu"] + a["b_mu"]
    value = h @ a["w_v"] + a["b_v"][0]
    return mean, value, (cache, h)


def _check_input(params: PolicyParams, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.n_inputs:
        raise ValueError(f"state has {x.shape[-1]} entries, policy expects {params.n_inputs}")
    return x


def forward(params: PolicyParams, state):
    """Action distribution and value for one state ``(5B,)`` or a batch ``(n, 5B)``."""
    x = _check_input(params, state)
    mean, value, _ = _forward(params, np.atleast_2d(x))
    log_std = np.broadcast_to(params.arrays["log_std"], mean.shape)
    if x.ndim == 1:
        return DiagGaussian(mean[0], params.arrays["log_std"].copy()), float(value[0])
    return DiagGaussian(mean, log_std), value


def _backward(params: PolicyParams, cache, grad_mean, grad_value):
    a = params.arrays
    layers, h = cache
    g = {}
    g["w_mu"] = h.T @ grad_mean
    g["b_mu"] = grad_mean.sum(axis=0)
    g["w_v"] = h.T @ grad_value
    g["b_v"] = np.array([grad_value.sum()])
    dh = grad_mean @ a["w_mu"].T + np.outer(grad_value, a["w_v"])
    for i in reversed(range(params.n_layers)):
        h_in, z, xhat, sigma = layers[i]
        g[f"g{i}"] = (dh * xhat).sum(axis=0)
        g[f"o{i}"] = dh.sum(axis=0)
        dxhat = dh * a[f"g{i}"]
        d = xhat.shape[-1]
        dr = (d * dxhat - dxhat.sum(axis=-1, keepdims=True)
              - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)) / (d * sigma)
        dz = dr * (z > 0.0)
        g[f"w{i}"] = h_in.T @ dz
        g[f"b{i}"] = dz.sum(axis=0)
        dh = dz @ a[f"w{i}"].T
    g["log_std"] = np.zeros(params.n_beams)
    return g


def backward(params: PolicyParams, states, grad_mean, grad_value, grad_log_std=None) -> dict:
    """Parameter gradients of ``sum(grad_mean*mean) + sum(grad_value*value)``.

    ``grad_log_std`` is added to the log-stddev gradient unchanged, since
    that parameter bypasses the network.
    """
    x = np.atleast_2d(_check_input(params, states))
    _, _, cache = _forward(params, x)
    grads = _backward(params, cache, np.atleast_2d(grad_mean),
                      np.atleast_1d(np.asarray(grad_value, dtype=float)))
    if grad_log_std is not None:
        grads["log_std"] = grads["log_std"] + grad_log_std
    return grads


def sample(dist: DiagGaussian, rng: np.random.Generator) -> np.ndarray:
    return dist.mean + np.exp(dist.log_std) * rng.standard_normal(np.shape(dist.mean))


def log_prob(dist: DiagGaussian, action) -> np.ndarray:
    """Log density summed over the action dimensions."""
    action = np.asarray(action, dtype=float)
    if action.shape[-1] != np.shape(dist.mean)[-1]:
        raise ValueError("action and distribution dimensions differ")
    zscore = (action - dist.mean) * np.exp(-dist.log_std)
    return np.sum(-0.5 * zscore**2 - dist.log_std - 0.5 * LOG_2PI, axis=-1)


def entropy(dist: DiagGaussian) -> float:
    log_std = np.asarray(dist.log_std)
    return float(np.mean(np.sum(log_std + 0.5 * (LOG_2PI + 1.0), axis=-1)))


def action_to_power(action, p_max_w) -> np.ndarray:
    """Map the normalised action range [-1, 1] affinely onto [0, p_max]."""
    return 0.5 * (np.clip(action, -1.0, 1.0) + 1.0) * p_max_w


def power_to_action(power_w, p_max_w) -> np.ndarray:
    return 2.0 * np.asarray(power_w) / p_max_w - 1.0


def save_checkpoint(params: PolicyParams, path) -> None:
    meta = np.array([CHECKPOINT_VERSION, params.n_beams, params.hidden, params.n_layers], dtype=np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=meta, **params.arrays)


def load_checkpoint(path) -> PolicyParams:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = data["__meta__"]
        if int(meta[0]) != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {int(meta[0])}")
        names = [k for k in data.files if k != "__meta__"]
        arrays = {k: data[k].copy() for k in names}
    n_beams, hidden, n_layers = (int(v) for v in meta[1:])
    # restore the canonical parameter order
    ref = init_policy(n_beams, np.random.default_rng(0), hidden, n_layers)
    if set(ref.arrays) != set(arrays):
        raise ValueError(f"{path}: parameter names do not match the architecture")
    for k, v in ref.arrays.items():
        if arrays[k].shape != v.shape:
            raise ValueError(f"{path}: {k} has shape {arrays[k].shape}, expected {v.shape}")
    return PolicyParams({k: arrays[k] for k in ref.arrays}, n_beams, hidden, n_layers)
