from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nashdyn.dynamics import (DynamicsConfig, GibbsEntropy, ScoreState, choice_map, ctld_step,
                              dtld_step_exact, dtld_update, entropy, euler_step, fenchel_coupling,
                              fixed_point_map, lipschitz_estimate, map_bound, perturbed_scores,
                              regularized_payoff_probe, run_ctld, run_dtld, score_residual,
                              stable_step, stationarity_check, zero_scores)
from nashdyn.equilibrium import nash_conv
from nashdyn.evaluation import evaluate
from nashdyn.game import uniform_profile
from nashdyn.games import build_cournot, gen_random_game

from conftest import dirichlet_profile

finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 4), elements=finite), st.floats(0.05, 5), st.integers(0, 1000))
def test_fenchel_coupling_nonnegative_zero_at_choice(y, eps, seed):
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(4), size=3)
    assert fenchel_coupling(pi, y, eps) >= -1e-9
    assert fenchel_coupling(choice_map([y], eps)[0], y, eps) == pytest.approx(0.0, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (2, 3), elements=finite), arrays(float, (2, 1), elements=finite))
def test_choice_map_per_state_shift_invariant(y, c):
    np.testing.assert_allclose(choice_map([y + c], 0.3)[0], choice_map([y], 0.3)[0], atol=1e-12)


def test_entropy_regularizer():
    reg = GibbsEntropy(0.5)
    u = np.full((1, 4), 0.25)
    assert reg.value(u)[0] == pytest.approx(-0.5 * np.log(4))
    assert entropy(np.array([1.0, 0.0]), 0.5) == pytest.approx(0.0)
    np.testing.assert_allclose(reg.choice(np.zeros((2, 3))), np.full((2, 3), 1 / 3))


def test_config_validation():
    with pytest.raises(ValueError):
        DynamicsConfig(epsilon=0)
    with pytest.raises(ValueError):
        DynamicsConfig(power=0.5)
    assert DynamicsConfig(alpha0=2, offset=1, power=1).alpha(3) == 0.5


def test_score_state_rejects_nan():
    with pytest.raises(FloatingPointError):
        ScoreState((np.array([[np.nan]]),))


def test_rk4_step_is_fourth_order(small_game):
    """Halving h cuts the one-step error against a fine reference by about 32."""
    y0 = perturbed_scores(small_game, 1, 0.5)
    cfg = DynamicsConfig(epsilon=0.5, auto_step=False)

    def step(h, k):
        s = ScoreState(tuple(y0))
        c = DynamicsConfig(epsilon=0.5, step=h, auto_step=False)
        for _ in range(k):
            s = ctld_step(small_game, s, c)
        return np.concatenate([v.ravel() for v in s.y])

    ref = step(0.4 / 64, 64)
    e1 = np.abs(step(0.4, 1) - ref).max()
    e2 = np.abs(step(0.2, 2) - ref).max()
    assert 8 < e1 / e2 < 64


def test_euler_matches_dtld_update(small_game):
    y0 = perturbed_scores(small_game, 2)
    cfg = DynamicsConfig(step=0.1, eta=2.0)
    e = euler_step(small_game, ScoreState(tuple(y0)), cfg)
    w = fixed_point_map(small_game, y0, cfg.epsilon)
    for a, b in zip(e.y, dtld_update(y0, w, 0.1, 2.0)):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_stable_step_caps_by_eta(pennies):
    y = zero_scores(pennies)
    L = lipschitz_estimate(pennies, y, 0.1)
    assert L == pytest.approx(100.0, rel=0.05)  # rotation rate 10/eps at the uniform profile
    h1 = stable_step(pennies, y, DynamicsConfig(epsilon=0.1))
    h10 = stable_step(pennies, y, DynamicsConfig(epsilon=0.1, eta=10))
    assert h10 == pytest.approx(h1 / 10)
    assert stable_step(pennies, y, DynamicsConfig(epsilon=0.1, auto_step=False)) == 0.05


def test_ctld_converges_on_cournot():
    g = build_cournot()
    cfg = DynamicsConfig(epsilon=1.0)
    state, trace = run_ctld(g, None, cfg)
    assert trace.status == "converged"
    prof = choice_map(state.y, 1.0)
    assert stationarity_check(g, prof, 1.0) < 1e-6
    assert regularized_payoff_probe(g, prof, 1.0, probes=20) < 1e-9


def test_ctld_max_time_status(pennies):
    cfg = DynamicsConfig(epsilon=0.1, max_time=0.1)
    _, trace = run_ctld(pennies, perturbed_scores(pennies, 0), cfg)
    assert trace.status == "max_time"
    assert trace.rows[-1]["nashconv_total"] is not None


def test_ctld_trace_deterministic(pennies):
    cfg = DynamicsConfig(epsilon=1.0)
    y0 = perturbed_scores(pennies, 4)
    a = run_ctld(pennies, y0, cfg)[1]
    b = run_ctld(pennies, y0, cfg)[1]
    assert a.rows == b.rows


def test_dtld_exact_step(small_game):
    cfg = DynamicsConfig(epsilon=0.5)
    s = dtld_step_exact(small_game, ScoreState(tuple(zero_scores(small_game))), cfg, 0)
    # alpha_0 = 1, eta = 1: a full step lands on w(sigma(0))
    w = evaluate(small_game, uniform_profile(small_game)).w
    for a, b in zip(s.y, w):
        np.testing.assert_allclose(a, b)
    with pytest.raises(ValueError):
        dtld_step_exact(small_game, s, cfg, -1)


def test_dtld_and_ctld_share_fixed_point():
    g = build_cournot()
    ys, _ = run_ctld(g, None, DynamicsConfig(epsilon=1.0))
    yd, trace = run_dtld(g, None, DynamicsConfig(epsilon=1.0, eta=3.0))
    assert trace.status == "converged"
    for a, b in zip(ys.y, yd.y):
        np.testing.assert_allclose(a, b, atol=1e-5)


def test_dtld_with_estimator_runs_full_budget(pennies):
    calls = []

    def est(l, profile):
        calls.append(l)
        return evaluate(pennies, profile).w

    _, trace = run_dtld(pennies, None, DynamicsConfig(max_iters=7), estimator=est)
    assert calls == list(range(7)) and trace.info["iterations"] == 7


def test_map_bound_dominates(small_game, rand_profile):
    bound = map_bound(small_game)
    for seed in range(5):
        w = evaluate(small_game, rand_profile(small_game, seed)).w
        assert max(np.abs(x).max() for x in w) <= bound


def test_score_residual_zero_at_fixed_point(pennies):
    assert score_residual(pennies, zero_scores(pennies), 0.1) == 0.0
