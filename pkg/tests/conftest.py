from __future__ import annotations

import numpy as np
import pytest

from nashdyn.games import build_matching_pennies, gen_random_game

ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    """Collect a line for the end-of-session acceptance summary (and echo it)."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def pennies():
    return build_matching_pennies()


@pytest.fixture
def small_game():
    return gen_random_game(5, 2, 3, (2, 3))


def dirichlet_profile(game, seed):
    rng = np.random.default_rng(seed)
    return [rng.dirichlet(np.ones(k), size=game.state_count) for k in game.action_counts]


@pytest.fixture
def rand_profile():
    return dirichlet_profile
