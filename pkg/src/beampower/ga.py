"""Genetic-algorithm baseline: one continuous power vector per timestep.

Each sampled timestep is an independent problem with its own seed, so a
series can be spread over worker processes without changing results.
"""
from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .env import RewardConfig, SatelliteConfig, clip_actions, reward, usd


@dataclass(frozen=True)
class GaConfig:
    population: int = 200
    iterations: int = 500
    tournament_k: int = 3
    crossover_rate: float = 0.9
    # standard deviation of the mutation step, as a fraction of p_max
    mutation_sigma: float = 0.05
    # per-generation multiplier on the mutation step, and its floor
    mutation_decay: float = 0.99
    mutation_floor: float = 1e-4
    # chance that a given gene mutates; 0 means 1/n_beams
    mutation_prob: float = 0.0
    elitism: int = 2
    seed: int = 0
    n_workers: int = 8

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must lie in [0, population)")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.tournament_k < 1:
            raise ValueError("tournament_k must be at least 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.n_workers < 1:
            raise ValueError("n_workers must be at least 1")

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


@dataclass(frozen=True)
class Individual:
    genes: np.ndarray
    fitness: float


@dataclass(frozen=True)
class TimestepResult:
    t: int
    usd: float
    energy_ratio: float
    best_fitness: float
    wall_ms: float
    best: Individual
    history: np.ndarray


class FitnessProblem:
    """Reward of candidate power vectors against one demand row."""

    def __init__(self, demand_row, config: SatelliteConfig, reward_cfg: RewardConfig,
                 p_opt_w=None):
        self.config = config
        self.demand = np.asarray(demand_row, dtype=float)
        if self.demand.shape != (config.n_beams,):
            raise ValueError(f"demand row has shape {self.demand.shape}, expected ({config.n_beams},)")
        if p_opt_w is None:
            p_opt_w, _ = config.link.optimal_power_w(self.demand)
        self.p_opt_w = np.asarray(p_opt_w, dtype=float)
        self.reward_cfg = reward_cfg

    def clip(self, genes):
        return clip_actions(genes, self.config.p_max_w, self.config.p_total)

    def __call__(self, genes) -> np.ndarray:
        genes = np.atleast_2d(self.clip(genes))
        rates = self.config.link.achieved_rate_w(genes)
        return np.atleast_1d(reward(genes, rates, self.demand, self.p_opt_w, self.reward_cfg))


def evaluate_fitness(genes, demand_row, config: SatelliteConfig,
                     reward_cfg: RewardConfig = RewardConfig(), p_opt_w=None):
    """Environment reward for ``genes`` after clipping; a float for one vector."""
    genes = np.asarray(genes, dtype=float)
    out = FitnessProblem(demand_row, config, reward_cfg, p_opt_w)(genes)
    return float(out[0]) if genes.ndim == 1 else out


def _tournament(fitness, n, k, rng):
    picks = rng.integers(0, fitness.size, size=(n, k))
    return picks[np.arange(n), np.argmax(fitness[picks], axis=1)]


def _next_generation(pop, fitness, ga: GaConfig, sigma_w, rng):
    n, n_beams = pop.shape
    order = np.argsort(-fitness, kind="stable")
    elite = pop[order[:ga.elitism]]

    n_children = n - ga.elitism
    n_pairs = (n_children + 1) // 2
    parents = pop[_tournament(fitness, 2 * n_pairs, ga.tournament_k, rng)]
    a, b = parents[0::2], parents[1::2]
    w = rng.random((n_pairs, n_beams))
    cross = rng.random(n_pairs) < ga.crossover_rate
    w = np.where(cross[:, None], w, 1.0)
    children = np.concatenate([w * a + (1.0 - w) * b, (1.0 - w) * a + w * b])[:n_children]

    p_mut = ga.mutation_prob or 1.0 / n_beams
    mask = rng.random(children.shape) < p_mut
    step = rng.standard_normal(children.shape) * sigma_w
    children = children + np.where(mask, step, 0.0)
    return np.concatenate([elite, children])


def run_ga(demand_row, config: SatelliteConfig, ga: GaConfig,
           reward_cfg: RewardConfig = RewardConfig(), rng=None, p_opt_w=None):
    """Evolve one power vector for one demand row.

    Returns the best individual and the best fitness after each
    generation; entry 0 is the initial population.
    """
    rng = np.random.default_rng(ga.seed) if rng is None else rng
    problem = FitnessProblem(demand_row, config, reward_cfg, p_opt_w)
    p_max = config.p_max_w
    pop = problem.clip(rng.random((ga.population, config.n_beams)) * p_max)
    fitness = problem(pop)
    history = [float(fitness.max())]
    scale = ga.mutation_sigma
    for _ in range(ga.iterations):
        pop = problem.clip(_next_generation(pop, fitness, ga, scale * p_max, rng))
        fitness = problem(pop)
        history.append(float(fitness.max()))
        scale = max(scale * ga.mutation_decay, ga.mutation_floor)
    best = int(np.argmax(fitness))
    return Individual(pop[best].copy(), float(fitness[best])), np.array(history)


def timestep_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, t]))


def _solve_timestep(args):
    t, demand_row, p_opt, config, ga, reward_cfg = args
    start = time.perf_counter()
    best, history = run_ga(demand_row, config, ga, reward_cfg, timestep_rng(ga.seed, t), p_opt)
    wall_ms = (time.perf_counter() - start) * 1e3
    rates = config.link.achieved_rate_w(best.genes)
    total_demand = float(np.sum(demand_row))
    shortfall = usd(demand_row, rates) / total_demand if total_demand > 0 else 0.0
    ratio = float(np.sum(best.genes) / np.sum(p_opt))
    return TimestepResult(t, shortfall, ratio, float(history[-1]), wall_ms, best, history)


def sample_times(start: int, stop: int, stride: int) -> list[int]:
    if stride < 1:
        raise ValueError("stride must be at least 1")
    return list(range(start, stop, stride))


def run_ga_series(demand, sample_stride: int, config: SatelliteConfig, ga: GaConfig,
                  reward_cfg: RewardConfig = RewardConfig(), episode_range=None):
    """Run the GA on every ``sample_stride``-th row of ``demand``.

    ``demand`` is a DemandSeries; ``t`` in the results is the absolute
    row index. ``usd`` is the shortfall as a fraction of aggregate
    demand, ``energy_ratio`` the power total over the optimal total.
    """
    values = demand.values
    start, stop = episode_range if episode_range else (0, values.shape[0])
    times = sample_times(start, stop, sample_stride)
    p_opt, _ = config.link.optimal_power_w(values[times])
    jobs = [(t, values[t], p_opt[i], config, ga, reward_cfg) for i, t in enumerate(times)]
    if ga.n_workers == 1 or len(jobs) == 1:
        return [_solve_timestep(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=ga.n_workers) as pool:
        return list(pool.map(_solve_timestep, jobs))


def write_series_csv(results, path, with_timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["t", "usd", "energy_ratio", "best_fitness"]
        w.writerow(header + ["wall_ms"] if with_timing else header)
        for r in results:
            row = [r.t, repr(r.usd), repr(r.energy_ratio), repr(r.best_fitness)]
            w.writerow(row + [repr(r.wall_ms)] if with_timing else row)
