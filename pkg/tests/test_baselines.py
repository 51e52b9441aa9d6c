from __future__ import annotations

import numpy as np
import pytest

from nashdyn.baselines import run_fp, run_ibr
from nashdyn.game import deterministic_profile, uniform_profile
from nashdyn.games import build_biased_pennies


def test_ibr_cycles_on_pennies(pennies):
    run = run_ibr(pennies, deterministic_profile(pennies, [0, 0]), 8)
    acts = [tuple(int(p[0].argmax()) for p in prof) for prof in run.profiles]
    assert acts[:5] == [(0, 0), (0, 1), (1, 1), (1, 0), (0, 0)]
    assert acts[4:] == acts[:5][:len(acts) - 4]
    np.testing.assert_allclose(run.nashconv(), 20.0)


def test_fp_decreasing_on_pennies(pennies):
    nc = run_fp(pennies, deterministic_profile(pennies, [0, 0]), 200).nashconv()
    assert nc[10] == pytest.approx(4.0)
    assert nc[200] < nc[10]


def test_fp_averages_stay_in_simplex():
    g = build_biased_pennies()
    run = run_fp(g, uniform_profile(g), 30, workers=2)
    for prof in run.profiles:
        for p in prof:
            np.testing.assert_allclose(p.sum(axis=1), 1.0)
            assert p.min() >= 0


def test_trace_columns(tmp_path, pennies):
    run = run_ibr(pennies, uniform_profile(pennies), 3)
    run.trace.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].endswith("status,algorithm") and len(lines) == 5


def test_iters_validation(pennies):
    with pytest.raises(ValueError):
        run_ibr(pennies, uniform_profile(pennies), 0)
