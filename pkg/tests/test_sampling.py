from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nashdyn.dynamics import DynamicsConfig, perturbed_scores, run_dtld
from nashdyn.evaluation import evaluate
from nashdyn.game import uniform_profile
from nashdyn.games import gen_random_game
from nashdyn.sampling import (EmpiricalValueTable, default_horizon, episode_rng, estimate_w, gae,
                              returns, rollout, rollouts, run_tabular_epo, truncation_bound)

from conftest import dirichlet_profile


def test_default_horizon_and_tail():
    assert default_horizon(0.9) == 66
    g = gen_random_game(0)
    assert truncation_bound(g, 66) == pytest.approx(0.9 ** 66 * g.r_max / 0.1)


def test_rollout_shapes_and_determinism(small_game, rand_profile):
    prof = rand_profile(small_game, 0)
    a = rollouts(small_game, prof, 7, 12, episode_rng(3, 0))
    b = rollouts(small_game, prof, 7, 12, episode_rng(3, 0))
    assert a.states.shape == (7, 13) and a.actions.shape == (7, 12, 2)
    assert a.joint.shape == (7, 12) and a.rewards.shape == (2, 7, 12)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    assert a.states.max() < small_game.state_count
    assert rollout(small_game, prof, 5, episode_rng(0)).episodes == 1


def test_rollout_rewards_match_table(small_game, rand_profile):
    t = rollouts(small_game, rand_profile(small_game, 1), 4, 9, episode_rng(1))
    for i in range(2):
        np.testing.assert_array_equal(
            t.rewards[i], small_game.rewards[i][t.states[:, :-1], t.joint])


def test_start_state_distribution():
    g = gen_random_game(2, 2, 4, 2)
    t = rollouts(g, uniform_profile(g), 40_000, 1, episode_rng(0))
    freq = np.bincount(t.states[:, 0], minlength=4) / 40_000
    np.testing.assert_allclose(freq, g.rho0, atol=0.01)


def test_returns_oracle(small_game, rand_profile):
    t = rollouts(small_game, rand_profile(small_game, 2), 3, 6, episode_rng(2))
    G = returns(t, 0.9, 1)
    for m in range(3):
        for k in range(6):
            expect = sum(0.9 ** (j - k) * t.rewards[1, m, j] for j in range(k, 6))
            assert G[m, k] == pytest.approx(expect, abs=1e-12)


def test_gae_limits(small_game, rand_profile):
    t = rollouts(small_game, rand_profile(small_game, 3), 4, 8, episode_rng(5))
    V = np.random.default_rng(0).normal(size=(2, 3))
    s = t.states
    delta = t.rewards[0] + 0.9 * V[0][s[:, 1:]] - V[0][s[:, :-1]]
    np.testing.assert_allclose(gae(t, V, 0.9, 0.0, 0), delta, atol=1e-12)
    tail = 0.9 ** (8 - np.arange(8)) * V[0][s[:, -1]][:, None]
    expect = returns(t, 0.9, 0) - V[0][s[:, :-1]] + tail
    np.testing.assert_allclose(gae(t, V, 0.9, 1.0, 0), expect, atol=1e-12)
    with pytest.raises(ValueError):
        gae(t, V, 0.9, 1.5, 0)


def test_empirical_values_and_window(small_game, rand_profile):
    prof = rand_profile(small_game, 4)
    batches = [rollouts(small_game, prof, 5, 10, episode_rng(9, l)) for l in range(3)]
    full = EmpiricalValueTable(2, 3)
    last = EmpiricalValueTable(2, 3, window=1)
    only = EmpiricalValueTable(2, 3)
    for b in batches:
        full.update(b, 0.9)
        last.update(b, 0.9)
    only.update(batches[-1], 0.9)
    np.testing.assert_allclose(last.estimate(), only.estimate(), atol=1e-12)
    assert not np.allclose(full.estimate(), only.estimate())


def test_empirical_value_weights_oracle(small_game, rand_profile):
    t = rollouts(small_game, rand_profile(small_game, 5), 2, 4, episode_rng(4))
    tab = EmpiricalValueTable(2, 3).update(t, 0.9)
    G = returns(t, 0.9, 0)
    num, den = np.zeros(3), np.zeros(3)
    for m in range(2):
        for k in range(4):
            num[t.states[m, k]] += 0.9 ** k * G[m, k]
            den[t.states[m, k]] += 0.9 ** k
    seen = den > 0
    np.testing.assert_allclose(tab.estimate()[0][seen], num[seen] / den[seen])
    assert np.all(tab.estimate()[0][~seen] == 0)


def test_estimate_w_exact_mode(small_game, rand_profile):
    prof = rand_profile(small_game, 6)
    est = estimate_w(small_game, prof, 10, 10, episode_rng(0), mode="exact")
    for a, b in zip(est.mean, evaluate(small_game, prof).w):
        np.testing.assert_array_equal(a, b)


def test_estimate_w_unbiased_small_game(small_game, rand_profile):
    prof = rand_profile(small_game, 7)
    rep = evaluate(small_game, prof)
    est = estimate_w(small_game, prof, 4000, 120, episode_rng(11), values=rep.V)
    for m, se, w in zip(est.mean, est.standard_error(), rep.w):
        assert np.all(np.abs(m - w) <= 4 * se + 1e-3)


def test_estimate_w_rejects_bad_args(pennies):
    with pytest.raises(ValueError):
        estimate_w(pennies, uniform_profile(pennies), 10, 10, episode_rng(0), mode="magic")
    with pytest.raises(ValueError):
        estimate_w(pennies, uniform_profile(pennies), 10, 10, episode_rng(0), baseline="nowhere")


def test_state_baseline_shift_neutral(small_game):
    cfg = DynamicsConfig(epsilon=0.5, max_iters=15, alpha0=0.1)
    shift = np.random.default_rng(0).normal(scale=5.0, size=(2, 3))
    logs = []
    for s in (None, shift):
        log = []
        run_tabular_epo(small_game, cfg, 16, 30, mode="unbiased", seed=2, baseline="state",
                        baseline_shift=s, policy_log=log)
        logs.append(log)
    for a, b in zip(*logs):
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-9)


def test_epo_seeded_traces_identical(pennies):
    cfg = DynamicsConfig(epsilon=0.1, max_iters=20, alpha0=0.01)
    y0 = perturbed_scores(pennies, 1)
    a = run_tabular_epo(pennies, cfg, 16, 20, seed=5, y0=y0)[1]
    b = run_tabular_epo(pennies, cfg, 16, 20, seed=5, y0=y0)[1]
    c = run_tabular_epo(pennies, cfg, 16, 20, seed=6, y0=y0)[1]
    assert a.rows == b.rows
    assert a.rows != c.rows
    assert a.constants == {"M": 16, "H": 20, "mode": "gae", "seed": 5}


def test_epo_exact_mode_is_dtld(small_game):
    cfg = DynamicsConfig(epsilon=0.5, max_iters=50)
    y0 = perturbed_scores(small_game, 0)
    s1, t1 = run_tabular_epo(small_game, cfg, 8, 10, mode="exact", y0=y0)
    s2, t2 = run_dtld(small_game, y0, cfg)
    for a, b in zip(s1.y, s2.y):
        np.testing.assert_array_equal(a, b)
    assert t1.column("residual_inf") == t2.column("residual_inf")
