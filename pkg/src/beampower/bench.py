"""Timing of the numba kernels against their numpy twins.

Both backends are imported side by side, so one process can time them
without touching ``BEAMPOWER_DISABLE_NUMBA``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .kernels import backend_module
from .linkbudget import default_modcod_table, draw_beams, LinkModel


@dataclass(frozen=True)
class BenchRow:
    kernel: str
    numba_ms: float
    numpy_ms: float
    identical: bool

    @property
    def speedup(self) -> float:
        return self.numpy_ms / self.numba_ms


def _time(fn, args, repeat):
    fn(*args)  # warm-up, and the compile for numba
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def kernel_cases(n_beams: int = 8, n_rows: int = 200, seed: int = 0):
    """Argument tuples shaped like a GA generation and a PPO rollout."""
    rng = np.random.default_rng(seed)
    table = default_modcod_table()
    link = LinkModel(draw_beams(n_beams, rng, table), table)
    p_dbw = link.keepalive_dbw + rng.uniform(-2.0, 10.0, size=(n_rows, n_beams))
    demand = rng.uniform(0.0, 1.2, size=(n_rows, n_beams)) * link.rates[:, 0]
    p_opt, _ = link.optimal_power(demand[:1])
    p_w = 10.0 ** (p_dbw / 10.0)
    rates = link.achieved_rate(p_dbw)
    steps, envs = 64, 8
    return {
        "achieved_rate": (p_dbw, link.link_const, link.need, link.spread, link.rates),
        "optimal_power": (demand, link.link_const, link.need, link.spread, link.rates, link.p_max_dbw),
        "reward": (p_w, rates, demand[0].copy(), 10.0 ** (p_opt[0] / 10.0), 100.0, 1.0),
        "gae": (-rng.random((steps, envs)), rng.standard_normal((steps, envs)),
                (rng.random((steps, envs)) < 0.02).astype(float), rng.standard_normal(envs), 0.1, 0.8),
    }


def run_benchmark(n_beams: int = 8, n_rows: int = 200, repeat: int = 20, seed: int = 0):
    fast, slow = backend_module("numba"), backend_module("numpy")
    rows = []
    for name, args in kernel_cases(n_beams, n_rows, seed).items():
        a, b = getattr(fast, name), getattr(slow, name)
        rows.append(BenchRow(name, _time(a, args, repeat), _time(b, args, repeat), _same(a(*args), b(*args))))
    return rows


def format_rows(rows) -> str:
    lines = [f"{'kernel':<15}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  identical"]
    for r in rows:
        lines.append(f"{r.kernel:<15}{r.numba_ms:>12.4f}{r.numpy_ms:>12.4f}{r.speedup:>10.1f}  {r.identical}")
    return "\n".join(lines)
