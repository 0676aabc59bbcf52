import numpy as np
import pytest

from beampower.env import Action, BeamPowerEnv, clip_actions
from beampower.ga import (
    GaConfig,
    evaluate_fitness,
    run_ga,
    run_ga_series,
    sample_times,
    write_series_csv,
)


@pytest.fixture
def problem(sat, demand, scenario):
    t = 40
    return demand.values[t], scenario.reward_config(sat), t


def test_config_validation():
    for bad in ({"population": 1}, {"elitism": 200}, {"tournament_k": 0},
                {"crossover_rate": 1.5}, {"n_workers": 0}, {"iterations": -1}):
        with pytest.raises(ValueError):
            GaConfig(**bad)


def test_fitness_zero_at_optimum(sat, problem):
    row, rc, _ = problem
    p_opt, ok = sat.link.optimal_power_w(row)
    assert ok.all()
    assert evaluate_fitness(p_opt, row, sat, rc) == 0.0


def test_fitness_negative_at_zero_power(sat, problem):
    row, rc, _ = problem
    assert evaluate_fitness(np.zeros(sat.n_beams), row, sat, rc) < 0.0


def test_fitness_matches_env_reward(sat, demand, scenario, problem):
    _, rc, t = problem
    env = BeamPowerEnv(sat, demand, (t, t + 1), rc)
    rng = np.random.default_rng(0)
    genes = rng.random((30, sat.n_beams)) * sat.p_max_w * 1.1
    batch = evaluate_fitness(genes, demand.values[t], sat, rc)
    for i in range(30):
        env.reset()
        out = env.step(Action(clip_actions(genes[i], sat.p_max_w, sat.p_total)))
        assert out.reward == batch[i]
        assert evaluate_fitness(genes[i], demand.values[t], sat, rc) == out.reward


def test_history_non_decreasing_and_prefix(sat, problem):
    row, rc, _ = problem
    best_long, hist_long = run_ga(row, sat, GaConfig(iterations=60, seed=2), rc)
    best_short, hist_short = run_ga(row, sat, GaConfig(iterations=1, seed=2), rc)
    assert np.all(np.diff(hist_long) >= 0)
    assert len(hist_long) == 61
    assert np.array_equal(hist_short, hist_long[:2])
    assert best_long.fitness >= best_short.fitness


def test_genes_stay_feasible(sat, problem):
    row, rc, _ = problem
    best, _ = run_ga(row, sat, GaConfig(iterations=30, population=20, seed=1, mutation_sigma=0.8), rc)
    assert np.all(best.genes >= 0) and np.all(best.genes <= sat.p_max_w)
    assert best.genes.sum() <= sat.p_total


def test_ga_is_deterministic(sat, problem):
    row, rc, _ = problem
    a, ha = run_ga(row, sat, GaConfig(iterations=20, seed=5), rc)
    b, hb = run_ga(row, sat, GaConfig(iterations=20, seed=5), rc)
    assert np.array_equal(a.genes, b.genes) and np.array_equal(ha, hb)


def test_ga_converges_near_optimum(sat, problem):
    row, rc, _ = problem
    best, _ = run_ga(row, sat, GaConfig(iterations=300, seed=0), rc)
    p_opt, _ = sat.link.optimal_power_w(row)
    rates = sat.link.achieved_rate_w(best.genes)
    assert np.all(rates >= row)
    assert best.genes.sum() / p_opt.sum() <= 1.10


def test_sample_times():
    assert len(sample_times(720, 1440, 10)) == 72
    with pytest.raises(ValueError):
        sample_times(0, 10, 0)


def test_series_independent_of_order_and_workers(sat, demand, scenario, tmp_path):
    rc = scenario.reward_config(sat)
    cfg = GaConfig(iterations=15, population=30, n_workers=1, seed=4)
    full = run_ga_series(demand, 25, sat, cfg, rc, (0, 100))
    part = run_ga_series(demand, 25, sat, cfg, rc, (50, 100))
    pooled = run_ga_series(demand, 25, sat, GaConfig(iterations=15, population=30, n_workers=2, seed=4), rc, (0, 100))
    assert [r.t for r in full] == [0, 25, 50, 75]
    by_t = {r.t: r for r in full}
    for r in part + pooled:
        assert r.best_fitness == by_t[r.t].best_fitness
        assert np.array_equal(r.best.genes, by_t[r.t].best.genes)
    assert all(r.wall_ms > 0 for r in full)
    write_series_csv(full, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "t,usd,energy_ratio,best_fitness,wall_ms"
    assert float(lines[1].split(",")[3]) == full[0].best_fitness
