"""Shared oracles for the test suite."""
import numpy as np

from beampower.policy import forward, init_policy
from beampower.ppo import Batch, ppo_loss


def random_batch(params, rng, n=16):
    obs = rng.standard_normal((n, params.n_inputs))
    dist, values = forward(params, obs)
    actions = dist.mean + rng.standard_normal(dist.mean.shape) * 0.7
    lp = np.sum(-0.5 * ((actions - dist.mean) / dist.std) ** 2 - dist.log_std
                - 0.5 * np.log(2 * np.pi), axis=-1)
    # stale log-probs and values so both clip branches show up
    return Batch(obs, actions, lp + rng.normal(0, 0.3, n), rng.standard_normal(n),
                 values + rng.normal(0, 1.0, n), values + rng.normal(0, 0.3, n))


def toy_problem(seed):
    rng = np.random.default_rng(seed)
    n_beams = int(rng.integers(1, 4))
    params = init_policy(n_beams, rng, hidden=int(rng.integers(3, 8)))
    for k, v in params.arrays.items():
        # move off the initial values so every parameter gets exercised
        params.arrays[k] = v + rng.normal(0, 0.3, v.shape)
    return params, random_batch(params, rng)


def ppo_loss_fd_error(params, batch, h=1e-5, clip=0.2, vf=0.5, ent=0.01):
    """Worst relative error between analytic and central-difference gradients."""
    _, grads, _ = ppo_loss(params, batch, clip, vf, ent)
    theta = params.flat()
    analytic = np.concatenate([grads[k].ravel() for k in params.arrays])
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        lu = ppo_loss(params.with_flat(up), batch, clip, vf, ent)[0]
        ld = ppo_loss(params.with_flat(down), batch, clip, vf, ent)[0]
        numeric[i] = (lu - ld) / (2 * h)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / scale))
