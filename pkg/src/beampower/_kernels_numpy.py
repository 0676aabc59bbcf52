"""Vectorised numpy twins of the loop kernels in ``_kernels_numba``."""
import numpy as np


def achieved_rate(power_dbw, link_const, need, spread, rates):
    cn0 = power_dbw + link_const
    passes = need <= cn0[..., None] + spread
    n_schemes = rates.shape[1]
    top = n_schemes - 1 - np.argmax(passes[..., ::-1], axis=-1)
    beam = np.broadcast_to(np.arange(rates.shape[0]), top.shape)
    return np.where(passes.any(axis=-1), rates[beam, top], 0.0)


def _required_power(need, spread, link_const):
    p = need - spread - link_const
    bad = ~(need <= (p + link_const) + spread)
    while bad.any():
        p = np.where(bad, np.nextafter(p, np.inf), p)
        bad = ~(need <= (p + link_const) + spread)
    return p


def keepalive_power(link_const, need, spread):
    return _required_power(need[:, 0], spread[:, 0], link_const)


def optimal_power(demand, link_const, need, spread, rates, p_max_dbw):
    n_schemes = rates.shape[1]
    keep = keepalive_power(link_const, need, spread)
    meets = rates[None, :, :] >= demand[..., None]
    m_star = np.where(meets.any(axis=-1), np.argmax(meets, axis=-1), -1)
    m_star = np.where(demand <= 0.0, 0, m_star)
    beam = np.broadcast_to(np.arange(rates.shape[0]), demand.shape)
    m_safe = np.clip(m_star, 0, n_schemes - 1)
    p = _required_power(
        need[beam, m_safe], spread[beam, m_safe], np.broadcast_to(link_const, demand.shape)
    )
    p = np.maximum(p, keep)
    ok = (m_star >= 0) & (p <= p_max_dbw)
    power = np.where(ok, p, np.broadcast_to(p_max_dbw, demand.shape))
    return power, ok


def _row_sum(x):
    # fixed left-to-right order, matching the compiled loop
    total = np.zeros(x.shape[:-1])
    for b in range(x.shape[-1]):
        total = total + x[..., b]
    return total


def reward(power_w, rates, demand, p_opt_w, alpha, power_ref):
    d_sum = float(_row_sum(demand))
    p_opt_sum = float(_row_sum(p_opt_w / power_ref))
    short = _row_sum(np.minimum(rates - demand, 0.0))
    dp = (power_w - p_opt_w) / power_ref
    sq = _row_sum(dp * dp)
    service = alpha * short / d_sum if d_sum > 0.0 else np.zeros_like(short)
    return service - sq / p_opt_sum


def gae(rewards, values, dones, last_values, gamma, lam):
    n_steps = rewards.shape[0]
    adv = np.zeros_like(rewards, dtype=float)
    running = np.zeros(rewards.shape[1])
    for t in range(n_steps - 1, -1, -1):
        next_value = last_values if t == n_steps - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
    return adv
