"""PPO with a clipped surrogate, GAE and synchronous parallel environments."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import kernels
from .env import Action, BeamPowerEnv, clip_actions
from .policy import (
    LOG_2PI,
    PolicyParams,
    _backward,
    _forward,
    action_to_power,
    flatten_grads,
    init_policy,
    save_checkpoint,
)

log = logging.getLogger(__name__)


@dataclass
class PpoConfig:
    gamma: float = 0.1
    lam: float = 0.8
    clip_range: float = 0.2
    learning_rate: float = 0.03
    n_steps: int = 64
    n_minibatches: int = 8
    n_epochs: int = 4
    max_grad_norm: float = 0.5
    n_envs: int = 8
    # environment steps per environment
    total_timesteps: int = 50_000
    alpha: float = 100.0
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-5
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not self.clip_range > 0:
            raise ValueError("clip_range must be positive")
        if (self.n_steps * self.n_envs) % self.n_minibatches:
            raise ValueError("batch size must split evenly into minibatches")

    @property
    def batch_size(self) -> int:
        return self.n_steps * self.n_envs

    @property
    def n_updates(self) -> int:
        return self.total_timesteps // self.n_steps

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


@dataclass
class Trajectory:
    """Rollout arrays laid out ``[step, env, ...]``."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    usd: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]


class VecEnv:
    """Steps a list of environments in lockstep with automatic resets."""

    def __init__(self, envs: list[BeamPowerEnv]):
        if not envs:
            raise ValueError("need at least one environment")
        self.envs = envs
        self.obs = np.stack([(e.reset(), e.observe())[1] for e in envs])

    def __len__(self):
        return len(self.envs)

    @property
    def p_max_w(self):
        return self.envs[0].config.p_max_w

    def step(self, power_w: np.ndarray):
        rewards = np.empty(len(self.envs))
        dones = np.zeros(len(self.envs))
        usd = np.empty(len(self.envs))
        for i, env in enumerate(self.envs):
            out = env.step(_clipped(env, power_w[i]))
            rewards[i], usd[i] = out.reward, out.usd
            if out.done:
                dones[i] = 1.0
                env.reset()
            self.obs[i] = env.observe()
        return self.obs.copy(), rewards, dones, usd


def _clipped(env, power):
    cfg = env.config
    return Action(clip_actions(power, cfg.p_max_w, cfg.p_total))


def collect_rollout(params: PolicyParams, venv: VecEnv, n_steps: int,
                    rng: np.random.Generator) -> Trajectory:
    n_envs, n_obs = venv.obs.shape
    n_beams = params.n_beams
    obs = np.empty((n_steps, n_envs, n_obs))
    actions = np.empty((n_steps, n_envs, n_beams))
    log_probs = np.empty((n_steps, n_envs))
    rewards = np.empty((n_steps, n_envs))
    values = np.empty((n_steps, n_envs))
    dones = np.empty((n_steps, n_envs))
    usd = np.empty((n_steps, n_envs))
    log_std = params.arrays["log_std"]
    for t in range(n_steps):
        obs[t] = venv.obs
        mean, value, _ = _forward(params, venv.obs)
        noise = rng.standard_normal(mean.shape)
        a = mean + np.exp(log_std) * noise
        actions[t] = a
        log_probs[t] = np.sum(-0.5 * noise**2 - log_std - 0.5 * LOG_2PI, axis=-1)
        values[t] = value
        _, rewards[t], dones[t], usd[t] = venv.step(action_to_power(a, venv.p_max_w))
    _, last_values, _ = _forward(params, venv.obs)
    return Trajectory(obs, actions, log_probs, rewards, values, dones, last_values, usd)


def compute_gae(traj: Trajectory, gamma: float, lam: float, normalize: bool = False):
    """Advantages and value targets; optionally standardised advantages.

    Returns are always built from the raw advantages.
    """
    adv = kernels.gae(
        np.ascontiguousarray(traj.rewards, dtype=float),
        np.ascontiguousarray(traj.values, dtype=float),
        np.ascontiguousarray(traj.dones, dtype=float),
        np.ascontiguousarray(traj.last_values, dtype=float),
        float(gamma),
        float(lam),
    )
    returns = adv + traj.values
    if normalize:
        adv = normalize_advantages(adv)
    return adv, returns


def normalize_advantages(adv, eps: float = 1e-8):
    return (adv - adv.mean()) / (adv.std() + eps)


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    old_values: np.ndarray

    def __len__(self):
        return self.obs.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(self.obs[idx], self.actions[idx], self.old_log_probs[idx],
                     self.advantages[idx], self.returns[idx], self.old_values[idx])


def ppo_loss(params: PolicyParams, batch: Batch, clip_range: float,
             value_coef: float, entropy_coef: float):
    """Clipped-surrogate loss and its exact gradient with respect to ``params``."""
    n = len(batch)
    mean, value, cache = _forward(params, batch.obs)
    log_std = params.arrays["log_std"]
    inv_std = np.exp(-log_std)
    z = (batch.actions - mean) * inv_std
    lp = np.sum(-0.5 * z**2 - log_std - 0.5 * LOG_2PI, axis=-1)
    ratio = np.exp(lp - batch.old_log_probs)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * adv
    pg_loss = -np.mean(np.minimum(surr1, surr2))

    dv = value - batch.old_values
    v_clipped = batch.old_values + np.clip(dv, -clip_range, clip_range)
    err1 = (value - batch.returns) ** 2
    err2 = (v_clipped - batch.returns) ** 2
    vf_loss = 0.5 * np.mean(np.maximum(err1, err2))

    ent = float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))
    loss = pg_loss + value_coef * vf_loss - entropy_coef * ent

    # d loss / d log-prob: only the unclipped branch carries gradient
    d_lp = np.where(surr1 <= surr2, -adv * ratio / n, 0.0)
    grad_mean = d_lp[:, None] * z * inv_std
    grad_log_std = (d_lp[:, None] * (z**2 - 1.0)).sum(axis=0) - entropy_coef
    inside = np.abs(dv) < clip_range
    d_value = np.where(err1 >= err2, value - batch.returns,
                       np.where(inside, v_clipped - batch.returns, 0.0))
    grad_value = value_coef * d_value / n

    grads = _backward(params, cache, grad_mean, grad_value)
    grads["log_std"] = grads["log_std"] + grad_log_std
    info = {
        "loss": float(loss),
        "pg_loss": float(pg_loss),
        "vf_loss": float(vf_loss),
        "entropy": ent,
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_range)),
        "approx_kl": float(np.mean(batch.old_log_probs - lp)),
    }
    return float(loss), grads, info


def clip_grad_norm(grad: np.ndarray, max_norm: float):
    norm = float(np.sqrt(np.dot(grad, grad)))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


class Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-5):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class UpdateAborted(RuntimeError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def make_batch(traj: Trajectory, config: PpoConfig) -> Batch:
    adv, returns = compute_gae(traj, config.gamma, config.lam)
    n = traj.n_steps * traj.n_envs
    return Batch(
        traj.obs.reshape(n, -1),
        traj.actions.reshape(n, -1),
        traj.log_probs.reshape(n),
        normalize_advantages(adv.reshape(n)),
        returns.reshape(n),
        traj.values.reshape(n),
    )


def ppo_update(params: PolicyParams, batch: Batch, config: PpoConfig, optimizer: Adam,
               rng: np.random.Generator):
    """Run the epochs of minibatch updates; returns new params and diagnostics."""
    theta = params.flat()
    current = params
    size = len(batch) // config.n_minibatches
    history = []
    for _ in range(config.n_epochs):
        order = rng.permutation(len(batch))
        for k in range(config.n_minibatches):
            mb = batch.take(order[k * size:(k + 1) * size])
            loss, grads, info = ppo_loss(current, mb, config.clip_range,
                                         config.value_coef, config.entropy_coef)
            flat = flatten_grads(current, grads)
            if not np.isfinite(loss) or not np.all(np.isfinite(flat)):
                raise UpdateAborted("non-finite loss or gradient", info)
            flat, info["grad_norm"] = clip_grad_norm(flat, config.max_grad_norm)
            theta = optimizer.step(theta, flat)
            current = params.with_flat(theta)
            history.append(info)
    diagnostics = {k: float(np.mean([h[k] for h in history])) for k in history[0]}
    return current, diagnostics


def make_envs(config, demand, episode_range, reward_cfg, n_envs, demand_scale=None):
    return VecEnv([BeamPowerEnv(config, demand, episode_range, reward_cfg, demand_scale)
                   for _ in range(n_envs)])


def train(sat, demand, reward_cfg, config: PpoConfig, episode_range=(0, 720),
          demand_scale=None, run_dir=None, params: PolicyParams | None = None,
          hidden: int | None = None):
    """Collect, estimate advantages, update; repeat for ``n_updates`` rounds.

    Returns the final parameters and the reward curve as a list of
    ``(update, timesteps, mean_reward, std_reward)`` rows.
    """
    init_rng, rollout_rng, update_rng = (np.random.default_rng(s) for s in
                                         np.random.SeedSequence(config.seed).spawn(3))
    if params is None:
        params = init_policy(sat.n_beams, init_rng, hidden)
    venv = make_envs(sat, demand, episode_range, reward_cfg, config.n_envs, demand_scale)
    optimizer = Adam(params.flat().size, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps)
    run_dir = Path(run_dir) if run_dir else None
    if run_dir:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.txt").write_text(config.to_text())

    curve = []
    for update in range(1, config.n_updates + 1):
        traj = collect_rollout(params, venv, config.n_steps, rollout_rng)
        batch = make_batch(traj, config)
        params, diag = ppo_update(params, batch, config, optimizer, update_rng)
        row = (update, update * config.n_steps, float(traj.rewards.mean()), float(traj.rewards.std()))
        curve.append(row)
        log.debug("update %d reward %.4f loss %.4f", update, row[2], diag["loss"])
        if run_dir and config.checkpoint_every and update % config.checkpoint_every == 0:
            save_checkpoint(params, run_dir / f"checkpoint_{update}.npz")

    if run_dir:
        save_checkpoint(params, run_dir / "checkpoint_final.npz")
        write_reward_curve(curve, run_dir / "rewards.csv")
    return params, curve


def write_reward_curve(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["update", "timesteps", "mean_reward", "std_reward"])
        for update, steps, mean, std in curve:
            w.writerow([update, steps, repr(mean), repr(std)])
