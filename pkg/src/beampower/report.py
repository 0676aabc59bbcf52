"""Deterministic policy evaluation and the aggregate report behind it."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .env import Action, BeamPowerEnv, clip_actions, parse_key_values
from .policy import PolicyParams, _forward, action_to_power

# Maps (observation, env) to a raw power request in Watts.
Actor = Callable[[np.ndarray, BeamPowerEnv], np.ndarray]


def policy_actor(params: PolicyParams) -> Actor:
    """Mean action of the Gaussian policy; no sampling."""
    def act(obs, env):
        mean, _, _ = _forward(params, obs[None, :])
        return action_to_power(mean[0], env.config.p_max_w)
    return act


def oracle_actor(obs, env):
    return env.p_opt_w[env.t]


def max_power_actor(obs, env):
    return env.config.p_max_w.copy()


@dataclass(frozen=True)
class RunMetrics:
    """Per-timestep series and summaries for one evaluation pass."""

    t: np.ndarray
    agg_demand: np.ndarray
    agg_rate: np.ndarray
    agg_power: np.ndarray
    agg_opt_power: np.ndarray
    usd: np.ndarray
    eval_ms: np.ndarray

    @property
    def usd_ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.agg_demand > 0, self.usd / np.where(self.agg_demand > 0, self.agg_demand, 1.0), 0.0)

    @property
    def agg_rate_ratio(self) -> float:
        return float(self.agg_rate.sum() / self.agg_demand.sum())

    @property
    def avg_usd(self) -> float:
        return float(self.usd_ratio.mean())

    @property
    def max_usd(self) -> float:
        return float(self.usd_ratio.max())

    @property
    def energy_ratio(self) -> float:
        return float(self.agg_power.sum() / self.agg_opt_power.sum())

    @property
    def avg_eval_ms(self) -> float:
        return float(self.eval_ms.mean())


def evaluate(actor: Actor, env: BeamPowerEnv) -> RunMetrics:
    """Run ``actor`` over the whole episode window of ``env``.

    The timing covers the actor call and the constraint clipping, i.e.
    everything needed to decide one timestep's allocation.
    """
    env.reset()
    cfg = env.config
    n = env.episode_length
    cols = {k: np.empty(n) for k in ("agg_demand", "agg_rate", "agg_power", "agg_opt_power", "usd", "eval_ms")}
    ts = np.arange(env.start, env.stop)
    for i in range(n):
        obs = env.observe()
        t0 = time.perf_counter()
        p = clip_actions(actor(obs, env), cfg.p_max_w, cfg.p_total)
        cols["eval_ms"][i] = (time.perf_counter() - t0) * 1e3
        out = env.step(Action(p))
        cols["agg_demand"][i] = out.demand.sum()
        cols["agg_rate"][i] = out.rates.sum()
        cols["agg_power"][i] = out.applied_power.sum()
        cols["agg_opt_power"][i] = out.optimal_power.sum()
        cols["usd"][i] = out.usd
    return RunMetrics(ts, **cols)


def write_timestep_csv(m: RunMetrics, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agg_demand", "agg_rate", "agg_power", "agg_opt_power", "usd"])
        for i in range(m.t.size):
            w.writerow([int(m.t[i])] + [repr(float(v)) for v in
                        (m.agg_demand[i], m.agg_rate[i], m.agg_power[i], m.agg_opt_power[i], m.usd[i])])


def ci_half_width(values, confidence: float = 0.95) -> float:
    """Student-t half width of the mean; 0 for a single value."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    q = stats.t.ppf(0.5 + confidence / 2.0, values.size - 1)
    return float(q * values.std(ddof=1) / math.sqrt(values.size))


@dataclass(frozen=True)
class EvalReport:
    agg_demand: float
    agg_rate_ratio: float
    avg_usd: float
    max_usd: float
    opt_energy: float
    output_energy_ratio: float
    avg_eval_time_ms: float
    runs: int
    ci_agg_rate_ratio: float
    ci_avg_usd: float
    ci_max_usd: float
    ci_output_energy_ratio: float
    ci_avg_eval_time_ms: float

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)!r}\n" for f in fields(self))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())


def build_report(runs: Sequence[RunMetrics]) -> EvalReport:
    if not runs:
        raise ValueError("no evaluation runs")
    series = {
        "agg_rate_ratio": [r.agg_rate_ratio for r in runs],
        "avg_usd": [r.avg_usd for r in runs],
        "max_usd": [r.max_usd for r in runs],
        "output_energy_ratio": [r.energy_ratio for r in runs],
        "avg_eval_time_ms": [r.avg_eval_ms for r in runs],
    }
    means = {k: float(np.mean(v)) for k, v in series.items()}
    cis = {f"ci_{k}": ci_half_width(v) for k, v in series.items()}
    return EvalReport(agg_demand=1.0, opt_energy=1.0, runs=len(runs), **means, **cis)


def load_report(path) -> dict[str, float]:
    with open(path) as fh:
        values = parse_key_values(fh.read(), str(path))
    try:
        return {k: float(v) for k, v in values.items()}
    except ValueError:
        raise ValueError(f"{path}: non-numeric report field") from None
