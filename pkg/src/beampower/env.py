"""Receding-horizon power allocation environment.

A step takes a per-beam power vector (W), clips it to the per-beam and
total power limits, runs the link budget, and scores the allocation
against the minimum power that would have met the demand.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .demand import DemandSeries
from .linkbudget import (
    BeamParams,
    LinkModel,
    ModcodTable,
    PhysicalConstants,
    default_modcod_table,
    draw_beams,
    load_modcod_table,
)

EPISODE_LENGTH = 720


@dataclass
class SatelliteConfig:
    beams: Sequence[BeamParams]
    p_total: float
    modcod: ModcodTable = field(default_factory=default_modcod_table)
    consts: PhysicalConstants = PhysicalConstants()

    def __post_init__(self):
        if not self.beams:
            raise ValueError("satellite needs at least one beam")
        if not self.p_total > 0:
            raise ValueError(f"p_total must be positive, got {self.p_total}")
        self.link = LinkModel(self.beams, self.modcod, self.consts)

    @property
    def n_beams(self) -> int:
        return len(self.beams)

    @property
    def p_max_w(self) -> np.ndarray:
        return self.link.p_max_w


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 100.0
    beta: float = 0.0
    # Watts per unit in the power term; 1.0 evaluates it in plain Watts
    power_ref: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.power_ref > 0:
            raise ValueError("power_ref must be positive")


@dataclass(frozen=True)
class EnvState:
    d_t: np.ndarray
    d_t1: np.ndarray
    d_t2: np.ndarray
    p_opt_t1: np.ndarray
    p_opt_t2: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.d_t, self.d_t1, self.d_t2, self.p_opt_t1, self.p_opt_t2])


@dataclass(frozen=True)
class Action:
    p: np.ndarray


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: float
    usd: float
    rates: np.ndarray
    applied_power: np.ndarray
    optimal_power: np.ndarray
    demand: np.ndarray
    done: bool


def clip_actions(raw, p_max_w, p_total) -> np.ndarray:
    """Clamp each row to ``[0, p_max]``, then scale rows whose sum exceeds ``p_total``."""
    p = np.clip(np.asarray(raw, dtype=float), 0.0, p_max_w)
    total = p.sum(axis=-1, keepdims=True)
    over = total > p_total
    if np.any(over):
        scale = np.where(over, p_total / np.where(over, total, 1.0), 1.0)
        p = p * scale
        # rescaling can overshoot by an ulp
        while np.any(p.sum(axis=-1) > p_total):
            bad = (p.sum(axis=-1) > p_total)[..., None]
            p = np.where(bad, p * (1.0 - 2.0**-52), p)
    return p


def clip_action(raw, config: SatelliteConfig) -> Action:
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw action must be finite")
    return Action(clip_actions(raw, config.p_max_w, config.p_total))


def usd(demands, rates) -> float:
    """Unmet demand: total shortfall of rate against demand (bps)."""
    demands = np.asarray(demands, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if demands.shape != rates.shape:
        raise ValueError(f"shape mismatch: {demands.shape} vs {rates.shape}")
    return float(np.maximum(demands - rates, 0.0).sum())


def reward(power_w, rates, demand, p_opt_w, reward_cfg: RewardConfig):
    """Per-step reward for one or many allocations against one demand row.

    ``power_w`` and ``rates`` may be ``(B,)`` or ``(n, B)``; the result is
    a float or an ``(n,)`` array to match.
    """
    power_w = np.asarray(power_w, dtype=float)
    single = power_w.ndim == 1
    out = kernels.reward(
        np.ascontiguousarray(np.atleast_2d(power_w)),
        np.ascontiguousarray(np.atleast_2d(np.asarray(rates, dtype=float))),
        np.ascontiguousarray(demand, dtype=float),
        np.ascontiguousarray(p_opt_w, dtype=float),
        float(reward_cfg.alpha),
        float(reward_cfg.power_ref),
    )
    return float(out[0]) if single else out


def objective(episode: Sequence[StepOutcome], beta: float) -> float:
    """Sum over steps of unmet demand plus ``beta`` times total power."""
    if not episode:
        raise ValueError("empty episode")
    return float(sum(o.usd + beta * float(np.sum(o.applied_power)) for o in episode))


class BeamPowerEnv:
    """One environment instance over a window of a demand series.

    The optimal-power oracle is evaluated once for every row at
    construction; ``step`` only runs the forward link budget.
    """

    def __init__(self, config: SatelliteConfig, demand: DemandSeries,
                 episode_range: tuple[int, int] = (0, EPISODE_LENGTH),
                 reward_cfg: RewardConfig = RewardConfig(),
                 demand_scale: float | None = None):
        start, stop = episode_range
        if demand.n_beams != config.n_beams:
            raise ValueError(f"demand has {demand.n_beams} beams, satellite has {config.n_beams}")
        if not 0 <= start < stop <= demand.n_steps:
            raise ValueError(f"episode range {episode_range} invalid for {demand.n_steps} steps")
        self.config = config
        self.demand = demand.values
        self.start, self.stop = start, stop
        self.reward_cfg = reward_cfg
        self.p_opt_w, self.satisfiable = config.link.optimal_power_w(self.demand)
        self.demand_scale = float(demand_scale or self.demand.max() or 1.0)
        self.t = start
        self.state = None

    @property
    def n_beams(self) -> int:
        return self.config.n_beams

    @property
    def episode_length(self) -> int:
        return self.stop - self.start

    def reset(self) -> EnvState:
        zeros = np.zeros(self.n_beams)
        self.t = self.start
        self.state = EnvState(self.demand[self.start].copy(), zeros, zeros, zeros, zeros)
        return self.state

    def observe(self, state: EnvState | None = None) -> np.ndarray:
        """Scaled state vector fed to the policy."""
        s = self.state if state is None else state
        d, p = self.demand_scale, self.config.p_max_w
        return np.concatenate([s.d_t / d, s.d_t1 / d, s.d_t2 / d, s.p_opt_t1 / p, s.p_opt_t2 / p])

    def step(self, action: Action) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        t = self.t
        p = np.asarray(action.p, dtype=float)
        d = self.demand[t]
        p_opt = self.p_opt_w[t]
        rates = self.config.link.achieved_rate_w(p)
        r = reward(p, rates, d, p_opt, self.reward_cfg)
        done = t == self.stop - 1
        nxt = self.demand[t + 1] if not done else np.zeros(self.n_beams)
        s = self.state
        self.state = EnvState(nxt.copy(), d.copy(), s.d_t1, p_opt.copy(), s.p_opt_t1)
        self.t = t + 1
        return StepOutcome(self.state, r, usd(d, rates), rates, p, p_opt.copy(), d.copy(), done)


# --- scenario files --------------------------------------------------------


@dataclass
class Scenario:
    """Everything needed to rebuild a satellite and its episode split."""

    n_beams: int = 8
    beam_seed: int = 0
    p_max_over_keepalive_db: float = 8.0
    ptot_ratio: float = 1.5
    obo: float = 0.0
    t_sys: float = 290.0
    modcod_file: str = ""
    alpha: float = 100.0
    beta: float = 0.0
    # "pmax" means the mean per-beam maximum power in Watts
    power_ref: str = "pmax"
    demand_seed: int = 7
    # peak demand as a multiple of the smallest keep-alive rate
    peak_over_keepalive: float = 1.4
    n_steps: int = 1440
    step_minutes: float = 2.0
    train_start: int = 0
    train_stop: int = 720
    test_start: int = 720
    test_stop: int = 1440

    def modcod_table(self) -> ModcodTable:
        return load_modcod_table(self.modcod_file) if self.modcod_file else default_modcod_table()

    def satellite(self) -> SatelliteConfig:
        table = self.modcod_table()
        rng = np.random.default_rng(self.beam_seed)
        beams = draw_beams(self.n_beams, rng, table, self.p_max_over_keepalive_db, self.obo, self.t_sys)
        p_max_w = 10.0 ** (np.array([b.p_max for b in beams]) / 10.0)
        return SatelliteConfig(beams, float(p_max_w.sum() / self.ptot_ratio), table)

    def reward_config(self, sat: SatelliteConfig) -> RewardConfig:
        if self.power_ref == "pmax":
            ref = float(np.mean(sat.p_max_w))
        else:
            ref = float(self.power_ref)
        return RewardConfig(self.alpha, self.beta, ref)

    def peak_demand(self, sat: SatelliteConfig) -> float:
        return self.peak_over_keepalive * float(sat.link.rates[:, 0].min())

    def split(self, name: str) -> tuple[int, int]:
        if name == "train":
            return self.train_start, self.train_stop
        if name == "test":
            return self.test_start, self.test_stop
        if name == "all":
            return self.train_start, self.test_stop
        raise ValueError(f"unknown split {name!r}")

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def parse_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def coerce_fields(cls, values: dict[str, str], source: str = "<string>") -> dict:
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, value in values.items():
        if key not in known:
            raise ValueError(f"{source}: unknown key {key!r}")
        default = known[key].default
        try:
            if isinstance(default, bool):
                out[key] = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                out[key] = int(value)
            elif isinstance(default, float):
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError:
            raise ValueError(f"{source}: bad value for {key}: {value!r}") from None
    return out


def load_scenario(path) -> Scenario:
    path = Path(path)
    values = parse_key_values(path.read_text(), str(path))
    known = {f.name for f in fields(Scenario)}
    return Scenario(**coerce_fields(Scenario, {k: v for k, v in values.items() if k in known}, str(path)))
