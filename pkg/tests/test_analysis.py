from __future__ import annotations

import numpy as np
import pytest

from nashdyn.analysis import (epsilon_sweep, mu_scan, finite_mu_probe, random_profile,
                              write_sweep_csv)
from nashdyn.dynamics import DynamicsConfig
from nashdyn.games import build_biased_pennies, build_cournot, gen_random_game


def test_cauchy_schwarz_bound_any_game():
    for seed in range(3):
        scan = mu_scan(gen_random_game(seed, 2, 3, 3), 50, seed)
        assert np.all(scan.inner_ratio <= scan.cs_ratio + 1e-12)
        np.testing.assert_allclose(scan.cs_ratio, scan.norm_ratio * scan.pi_distance)


def test_pennies_monotone(pennies):
    scan = mu_scan(pennies, 200, 0)
    assert scan.max_inner <= 1e-9
    assert scan.ordering_violations() == 0


def test_scan_reproducible_across_workers():
    g = build_cournot()
    a = mu_scan(g, 30, 4, workers=1)
    b = mu_scan(g, 30, 4, workers=3)
    np.testing.assert_array_equal(a.inner_ratio, b.inner_ratio)
    assert a.sample_count == 30 and len(a.samples) == 30


def test_histogram_csv(tmp_path, pennies):
    scan = mu_scan(pennies, 20, 1)
    scan.histogram_csv(tmp_path / "h.csv", bins=5)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "statistic,bin_left,bin_right,count"
    assert len(lines) == 1 + 10 + 1 and lines[-1].startswith("# summary")


def test_scan_rejects_zero_samples(pennies):
    with pytest.raises(ValueError):
        mu_scan(pennies, 0)


def test_random_profile_in_simplex(small_game):
    for p in random_profile(small_game, np.random.default_rng(0)):
        np.testing.assert_allclose(p.sum(axis=1), 1.0)


def test_finite_mu_probe():
    rep = finite_mu_probe(build_cournot(), 40, 2)
    assert rep.all_finite and rep.within_bound


def test_epsilon_sweep_trend(tmp_path):
    rows = epsilon_sweep(build_biased_pennies(), [0.5, 0.05], DynamicsConfig())
    assert [r.epsilon for r in rows] == [0.05, 0.5]
    assert rows[0].nashconv < rows[1].nashconv
    assert all(r.status == "converged" for r in rows)
    write_sweep_csv(tmp_path / "s.csv", rows)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "epsilon,nashconv,residual_inf,status,steps"
    with pytest.raises(ValueError):
        epsilon_sweep(build_biased_pennies(), [0.0], DynamicsConfig())
