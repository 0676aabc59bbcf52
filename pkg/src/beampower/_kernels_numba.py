"""Loop kernels compiled with numba.

Every function here has a twin in ``_kernels_numpy`` with the same
signature and the same floating-point operation order, so the two paths
return bit-identical results.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def achieved_rate(power_dbw, link_const, need, spread, rates):
    n, n_beams = power_dbw.shape
    n_schemes = rates.shape[1]
    out = np.zeros((n, n_beams))
    for i in range(n):
        for b in range(n_beams):
            cn0 = power_dbw[i, b] + link_const[b]
            for m in range(n_schemes - 1, -1, -1):
                if need[b, m] <= cn0 + spread[b, m]:
                    out[i, b] = rates[b, m]
                    break
    return out


@njit(cache=True)
def _required_power(b, m, link_const, need, spread):
    p = need[b, m] - spread[b, m] - link_const[b]
    # inversion can land one ulp short of the threshold
    while not need[b, m] <= (p + link_const[b]) + spread[b, m]:
        p = np.nextafter(p, np.inf)
    return p


@njit(cache=True)
def keepalive_power(link_const, need, spread):
    n_beams = link_const.shape[0]
    out = np.empty(n_beams)
    for b in range(n_beams):
        out[b] = _required_power(b, 0, link_const, need, spread)
    return out


@njit(cache=True)
def optimal_power(demand, link_const, need, spread, rates, p_max_dbw):
    n, n_beams = demand.shape
    n_schemes = rates.shape[1]
    power = np.empty((n, n_beams))
    ok = np.empty((n, n_beams), dtype=np.bool_)
    keep = keepalive_power(link_const, need, spread)
    for i in range(n):
        for b in range(n_beams):
            d = demand[i, b]
            m_star = -1
            if d <= 0.0:
                m_star = 0
            else:
                for m in range(n_schemes):
                    if rates[b, m] >= d:
                        m_star = m
                        break
            if m_star < 0:
                power[i, b] = p_max_dbw[b]
                ok[i, b] = False
                continue
            p = _required_power(b, m_star, link_const, need, spread)
            if p < keep[b]:
                p = keep[b]
            if p > p_max_dbw[b]:
                power[i, b] = p_max_dbw[b]
                ok[i, b] = False
            else:
                power[i, b] = p
                ok[i, b] = True
    return power, ok


@njit(cache=True)
def reward(power_w, rates, demand, p_opt_w, alpha, power_ref):
    n, n_beams = power_w.shape
    out = np.empty(n)
    d_sum = 0.0
    p_opt_sum = 0.0
    for b in range(n_beams):
        d_sum += demand[b]
        p_opt_sum += p_opt_w[b] / power_ref
    for i in range(n):
        short = 0.0
        sq = 0.0
        for b in range(n_beams):
            gap = rates[i, b] - demand[b]
            if gap < 0.0:
                short += gap
            dp = (power_w[i, b] - p_opt_w[b]) / power_ref
            sq += dp * dp
        service = alpha * short / d_sum if d_sum > 0.0 else 0.0
        out[i] = service - sq / p_opt_sum
    return out


@njit(cache=True)
def gae(rewards, values, dones, last_values, gamma, lam):
    n_steps, n_envs = rewards.shape
    adv = np.zeros((n_steps, n_envs))
    for e in range(n_envs):
        running = 0.0
        for t in range(n_steps - 1, -1, -1):
            next_value = last_values[e] if t == n_steps - 1 else values[t + 1, e]
            live = 1.0 - dones[t, e]
            delta = rewards[t, e] + gamma * next_value * live - values[t, e]
            running = delta + gamma * lam * live * running
            adv[t, e] = running
    return adv
