from __future__ import annotations

import itertools

import numpy as np
import pytest

from nashdyn.equilibrium import (NashConvReport, best_response, induced_mdp, logit_response,
                                 nash_conv, softmax_rows, value_iteration, write_nashconv_csv)
from nashdyn.evaluation import payoffs
from nashdyn.game import deterministic_profile, uniform_profile
from nashdyn.games import build_biased_pennies, build_cournot, gen_random_game

from conftest import dirichlet_profile


def enumerate_best(game, profile, player):
    """Exhaustive oracle over deterministic stationary policies."""
    k, S = game.action_counts[player], game.state_count
    best = -np.inf
    for acts in itertools.product(range(k), repeat=S):
        dev = list(profile)
        dev[player] = np.eye(k)[list(acts)]
        best = max(best, payoffs(game, dev)[player])
    return best


@pytest.mark.parametrize("seed", range(4))
def test_best_response_matches_enumeration(seed):
    g = gen_random_game(seed, 2, 3, (3, 2))
    prof = dirichlet_profile(g, seed)
    for i in range(2):
        br = best_response(g, prof, i)
        assert br.payoff == pytest.approx(enumerate_best(g, prof, i), abs=1e-10)
        assert np.all(br.policy.sum(axis=1) == 1) and set(np.unique(br.policy)) <= {0.0, 1.0}


@pytest.mark.parametrize("seed", range(3))
def test_value_iteration_agrees(seed):
    g = gen_random_game(seed, 3, 4, 2)
    prof = dirichlet_profile(g, seed)
    for i in range(3):
        V, _ = value_iteration(induced_mdp(g, prof, i))
        np.testing.assert_allclose(V, best_response(g, prof, i).values, atol=1e-8)


def test_best_response_tie_breaks_to_lowest(pennies):
    br = best_response(pennies, uniform_profile(pennies), 0)
    np.testing.assert_array_equal(br.policy, [[1.0, 0.0]])


def test_pennies_nashconv(pennies):
    assert nash_conv(pennies, uniform_profile(pennies)).total == pytest.approx(0.0, abs=1e-12)
    rep = nash_conv(pennies, deterministic_profile(pennies, [0, 0]))
    assert rep.total == pytest.approx(20.0)
    np.testing.assert_allclose(rep.gaps, [0.0, 20.0], atol=1e-12)


def test_biased_pennies_nash():
    g = build_biased_pennies()
    prof = [np.array([[0.4, 0.6]]), np.array([[0.4, 0.6]])]
    assert nash_conv(g, prof).total < 1e-10


def test_nashconv_nonnegative_and_workers(small_game, rand_profile):
    prof = rand_profile(small_game, 4)
    a = nash_conv(small_game, prof, workers=1)
    b = nash_conv(small_game, prof, workers=3)
    assert np.all(a.gaps >= -1e-12)
    np.testing.assert_array_equal(a.gaps, b.gaps)


def test_nashconv_csv(tmp_path, pennies):
    rep = nash_conv(pennies, uniform_profile(pennies))
    write_nashconv_csv(tmp_path / "n.csv", [(0, rep)])
    head, row = (tmp_path / "n.csv").read_text().splitlines()
    assert head == "iteration,gap_0,gap_1,total"
    assert float(row.split(",")[-1]) == pytest.approx(0.0, abs=1e-12)


def test_softmax_stable_and_shift_invariant():
    y = np.array([[1000.0, 999.0], [-5.0, 5.0]])
    p = softmax_rows(y, 0.1)
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    np.testing.assert_allclose(softmax_rows(y + np.array([[3.0], [-7.0]]), 0.1), p, atol=1e-15)


def test_logit_response_small_epsilon_is_best_response():
    g = build_cournot()
    prof = uniform_profile(g)
    lr = logit_response(g, prof, 0, 1e-4)
    br = best_response(g, prof, 0).policy
    np.testing.assert_allclose(lr, br, atol=1e-6)
