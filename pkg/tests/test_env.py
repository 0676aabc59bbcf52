import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beampower.demand import generate_synthetic
from beampower.env import (
    Action,
    BeamPowerEnv,
    RewardConfig,
    Scenario,
    StepOutcome,
    clip_action,
    clip_actions,
    load_scenario,
    objective,
    reward,
    usd,
)

from conftest import two_beam_sat


def test_usd_examples():
    assert usd([100, 50], [80, 60]) == 20
    assert usd([1, 2], [3, 4]) == 0
    assert usd([1, 2], [0, 0]) == 3
    with pytest.raises(ValueError):
        usd([1, 2], [1])


def test_reward_hand_examples():
    cfg = RewardConfig(alpha=100.0)
    assert reward([5.0], [80.0], [100.0], [5.0], cfg) == -20.0
    assert reward([12.0], [100.0], [100.0], [10.0], cfg) == pytest.approx(-0.4, abs=1e-15)
    assert reward([3.0, 4.0], [9.0, 9.0], [9.0, 9.0], [3.0, 4.0], cfg) == 0.0


def test_reward_zero_demand_guard():
    cfg = RewardConfig()
    assert reward([2.0], [0.0], [0.0], [2.0], cfg) == 0.0


def test_reward_batch_matches_rows():
    rng = np.random.default_rng(2)
    p, r = rng.random((7, 3)), rng.random((7, 3))
    d, po = rng.random(3), rng.random(3) + 0.1
    cfg = RewardConfig(power_ref=0.3)
    batch = reward(p, r, d, po, cfg)
    assert [reward(p[i], r[i], d, po, cfg) for i in range(7)] == batch.tolist()


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(alpha=0.0)
    with pytest.raises(ValueError):
        RewardConfig(power_ref=0.0)


def test_clip_examples():
    sat = two_beam_sat(p_total=10.0)
    assert np.allclose(sat.p_max_w, 10.0)
    assert np.array_equal(clip_actions([10.0, 10.0], sat.p_max_w, 10.0), [5.0, 5.0])
    assert np.array_equal(clip_actions([1.0, 2.0], sat.p_max_w, 10.0), [1.0, 2.0])
    big = two_beam_sat(p_total=100.0)
    assert np.array_equal(clip_actions(2 * big.p_max_w, big.p_max_w, 100.0), big.p_max_w)
    assert np.array_equal(clip_actions([-3.0, 1.0], big.p_max_w, 100.0), [0.0, 1.0])


def test_clip_action_rejects_nan():
    with pytest.raises(ValueError):
        clip_action([np.nan, 1.0], two_beam_sat(10.0))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2), st.floats(0.1, 30.0))
def test_clip_always_feasible(raw, p_total):
    sat = two_beam_sat(p_total)
    p = clip_action(raw, sat).p
    assert np.all(p >= 0) and np.all(p <= sat.p_max_w)
    assert p.sum() <= p_total


def test_reset_state(env, demand):
    s = env.reset()
    assert np.array_equal(s.d_t, demand.values[env.start])
    for f in (s.d_t1, s.d_t2, s.p_opt_t1, s.p_opt_t2):
        assert not f.any()
    assert s.as_vector().size == 5 * env.n_beams
    again = env.reset()
    assert np.array_equal(s.as_vector(), again.as_vector())


def test_reset_offset(sat, demand, scenario):
    env = BeamPowerEnv(sat, demand, scenario.split("test"))
    assert np.array_equal(env.reset().d_t, demand.values[scenario.test_start])


def test_bad_ranges(sat, demand):
    for rng in [(5, 5), (-1, 3), (0, demand.n_steps + 1)]:
        with pytest.raises(ValueError):
            BeamPowerEnv(sat, demand, rng)


def test_step_before_reset(env):
    with pytest.raises(RuntimeError):
        env.step(Action(np.zeros(env.n_beams)))


def test_history_matches_oracle(env, sat, demand):
    env.reset()
    rng = np.random.default_rng(0)
    for _ in range(3):
        out = env.step(clip_action(rng.random(env.n_beams) * sat.p_max_w, sat))
    t = env.t
    s = out.next_state
    assert np.array_equal(s.d_t, demand.values[t])
    assert np.array_equal(s.d_t1, demand.values[t - 1])
    assert np.array_equal(s.d_t2, demand.values[t - 2])
    for lag, field in ((1, s.p_opt_t1), (2, s.p_opt_t2)):
        expect, _ = sat.link.optimal_power_w(demand.values[t - lag])
        assert np.array_equal(field, expect)


def test_oracle_action_scores_zero(env, sat):
    env.reset()
    while True:
        p = env.p_opt_w[env.t]
        out = env.step(Action(p))
        assert out.reward == 0.0 and out.usd == 0.0
        if out.done:
            break
    assert env.t == env.stop


def test_episode_length_default(sat, demand):
    # scenario fixture has 200 rows, default range needs 720
    with pytest.raises(ValueError):
        BeamPowerEnv(sat, demand)
    sc = Scenario(n_beams=sat.n_beams)
    assert sc.split("train") == (0, 720) and sc.split("test") == (720, 1440)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_reward_never_positive(seed):
    sc = Scenario(n_beams=3, n_steps=10, train_stop=10)
    sat = sc.satellite()
    rng = np.random.default_rng(seed)
    p = clip_actions(rng.random(3) * sat.p_max_w * 1.2, sat.p_max_w, sat.p_total)
    d = rng.random(3) * sat.link.rates[:, 3]
    po, _ = sat.link.optimal_power_w(d)
    r = sat.link.achieved_rate_w(p)
    assert reward(p, r, d, po, sc.reward_config(sat)) <= 0.0


def test_objective():
    def outcome(u, p):
        z = np.zeros(1)
        return StepOutcome(None, 0.0, u, z, np.array(p), z, z, False)
    assert objective([outcome(0.0, [3.0])], beta=0.0) == 0.0
    assert objective([outcome(20.0, [2.0, 3.0])], beta=1.0) == 25.0
    with pytest.raises(ValueError):
        objective([], 1.0)


def test_scenario_file_round_trip(tmp_path):
    sc = Scenario(n_beams=3, alpha=50.0, power_ref="2.5", ptot_ratio=2.0)
    sc.save(tmp_path / "s.txt")
    assert load_scenario(tmp_path / "s.txt") == sc
    assert sc.reward_config(sc.satellite()).power_ref == 2.5


def test_scenario_file_errors(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("n_beams = four\n")
    with pytest.raises(ValueError, match="n_beams"):
        load_scenario(p)
    p.write_text("just words\n")
    with pytest.raises(ValueError, match=":1:"):
        load_scenario(p)


def test_default_scenario_ptot_and_satisfiable():
    sc = Scenario()
    sat = sc.satellite()
    assert sat.p_max_w.sum() == pytest.approx(1.5 * sat.p_total)
    d = generate_synthetic(sc.n_beams, sc.n_steps, sc.step_minutes, sc.demand_seed, sc.peak_demand(sat))
    _, ok = sat.link.optimal_power_w(d.values)
    assert ok.all()
