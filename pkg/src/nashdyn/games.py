"""Built-in example games and a seeded random-game generator."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .game import MarkovGame, joint_action_table


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


def build_matrix_game(payoffs: Sequence, gamma: float = 0.9, name: str = "matrix",
                      action_labels=None) -> MarkovGame:
    """Repeated normal-form game: one self-looping state.

    ``payoffs`` has shape ``(n, |A^1|, ..., |A^n|)``.
    """
    gamma = _check_gamma(gamma)
    payoffs = np.asarray(payoffs, dtype=float)
    n = payoffs.shape[0]
    counts = payoffs.shape[1:]
    if len(counts) != n:
        raise ValueError("payoff tensor must have one action axis per player")
    J = math.prod(counts)
    return MarkovGame(
        action_counts=counts,
        rewards=payoffs.reshape(n, 1, J),
        transitions=np.ones((1, J, 1)),
        gamma=gamma,
        rho0=np.ones(1),
        state_labels=("s0",),
        action_labels=action_labels,
        name=name,
    )


def build_matching_pennies(gamma: float = 0.9) -> MarkovGame:
    """Player 1 wins +1 when the coins match, player 2 wins otherwise."""
    r1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return build_matrix_game([r1, -r1], gamma, name="matching-pennies",
                             action_labels=(("H", "T"), ("H", "T")))


def build_biased_pennies(gamma: float = 0.9) -> MarkovGame:
    """Zero-sum 2x2 game whose unique Nash mixes (0.4, 0.6) for both players."""
    r1 = np.array([[2.0, -1.0], [-1.0, 1.0]])
    return build_matrix_game([r1, -r1], gamma, name="biased-pennies",
                             action_labels=(("H", "T"), ("H", "T")))


# ---------------------------------------------------------------------------
# grid soccer

SOCCER_ROWS, SOCCER_COLS = 4, 5
SOCCER_GOAL_ROWS = (1, 2)
SOCCER_ACTIONS = ("N", "S", "E", "W", "stand")
_MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, 1), 3: (0, -1), 4: (0, 0)}
SOCCER_START_A = (2, 3)
SOCCER_START_B = (2, 1)


def soccer_states() -> list[tuple[tuple[int, int], tuple[int, int], int]]:
    """All (pos_A, pos_B, ball) with distinct cells; ball 0 means A holds it."""
    cells = [(r, c) for r in range(SOCCER_ROWS) for c in range(SOCCER_COLS)]
    return [(a, b, ball) for a in cells for b in cells if a != b for ball in (0, 1)]


def _soccer_sequence(pos, ball, actions, order):
    """Run both moves in ``order``; return (next (posA, posB, ball) or None on goal, reward to A)."""
    pos = list(pos)
    for m in order:
        other = 1 - m
        r, c = pos[m]
        dr, dc = _MOVES[actions[m]]
        nr, nc = r + dr, c + dc
        if ball == m and r in SOCCER_GOAL_ROWS:
            # A attacks the right edge, B the left edge
            if m == 0 and nc == SOCCER_COLS:
                return None, 1.0
            if m == 1 and nc == -1:
                return None, -1.0
        if not (0 <= nr < SOCCER_ROWS and 0 <= nc < SOCCER_COLS):
            continue
        if (nr, nc) == pos[other]:
            # blocked: the stationary player ends up with the ball
            ball = other
            continue
        pos[m] = (nr, nc)
    return (pos[0], pos[1], ball), 0.0


def build_soccer(gamma: float = 0.9) -> MarkovGame:
    """Two-player zero-sum grid soccer on a 4x5 field (760 states, 5x5 actions).

    Both players pick a move simultaneously; moves execute in a uniformly random
    order. Moving into the opponent's square is cancelled and hands the ball to
    the stationary player. The ball carrier scores by stepping off its attacking
    edge (A: right, B: left) from one of the two middle rows; play then resets to
    A at (2, 3), B at (2, 1) with possession decided by a fair coin.
    """
    gamma = _check_gamma(gamma)
    states = soccer_states()
    index = {s: k for k, s in enumerate(states)}
    S, J = len(states), len(SOCCER_ACTIONS) ** 2
    reset = np.zeros(S)
    for ball in (0, 1):
        reset[index[(SOCCER_START_A, SOCCER_START_B, ball)]] = 0.5
    table = joint_action_table((5, 5))

    R = np.zeros((S, J))
    P = np.zeros((S, J, S))
    for s, (pa, pb, ball) in enumerate(states):
        for j, acts in enumerate(table):
            for order in ((0, 1), (1, 0)):
                nxt, r = _soccer_sequence((pa, pb), ball, acts, order)
                R[s, j] += 0.5 * r
                if nxt is None:
                    P[s, j] += 0.5 * reset
                else:
                    P[s, j, index[nxt]] += 0.5
    labels = tuple(f"A{pa[0]}{pa[1]}-B{pb[0]}{pb[1]}-{'AB'[ball]}" for pa, pb, ball in states)
    return MarkovGame(
        action_counts=(5, 5),
        rewards=np.stack([R, -R]),
        transitions=P,
        gamma=gamma,
        rho0=reset,
        reward_bound=1.0,
        state_labels=labels,
        action_labels=(SOCCER_ACTIONS, SOCCER_ACTIONS),
        name="soccer",
    )


# ---------------------------------------------------------------------------
# Cournot competition

COURNOT_INTERCEPTS = (4.0, 6.0, 8.0)
COURNOT_QUANTITIES = (0, 1, 2)
COURNOT_UNIT_COST = 1.0
COURNOT_SHIFT_PROB = 0.8


def build_cournot(n: int = 3, gamma: float = 0.9) -> MarkovGame:
    """n-firm quantity competition with a three-level demand state.

    Price is ``max(0, intercept - total)``; each firm pays unit cost 1. Demand
    moves one level down (up) with probability 0.8 when total output is above
    (below) ``n`` and stays put otherwise or at the boundary.
    """
    if n < 2:
        raise ValueError(f"Cournot competition needs at least 2 firms, got {n}")
    gamma = _check_gamma(gamma)
    counts = (len(COURNOT_QUANTITIES),) * n
    q = np.asarray(COURNOT_QUANTITIES, dtype=float)[joint_action_table(counts)]  # (J, n)
    total = q.sum(axis=1)
    S, J = len(COURNOT_INTERCEPTS), len(q)

    R = np.zeros((n, S, J))
    P = np.zeros((S, J, S))
    for s, a in enumerate(COURNOT_INTERCEPTS):
        price = np.maximum(0.0, a - total)
        R[:, s, :] = ((price - COURNOT_UNIT_COST)[:, None] * q).T
        for j in range(J):
            if total[j] > n and s > 0:
                target = s - 1
            elif total[j] < n and s < S - 1:
                target = s + 1
            else:
                P[s, j, s] = 1.0
                continue
            P[s, j, target] = COURNOT_SHIFT_PROB
            P[s, j, s] = 1.0 - COURNOT_SHIFT_PROB
    return MarkovGame(
        action_counts=counts,
        rewards=R,
        transitions=P,
        gamma=gamma,
        rho0=np.full(S, 1.0 / S),
        state_labels=("low", "mid", "high"),
        action_labels=tuple(tuple(str(x) for x in COURNOT_QUANTITIES) for _ in range(n)),
        name=f"cournot-{n}",
    )


# ---------------------------------------------------------------------------
# random games


def gen_random_game(seed: int, n: int = 2, state_count: int = 3,
                    action_counts: Sequence[int] | int = 2,
                    reward_range: tuple[float, float] = (-1.0, 1.0),
                    gamma: float = 0.9) -> MarkovGame:
    """Random dense game; identical seeds give bit-identical games."""
    if isinstance(action_counts, (int, np.integer)):
        action_counts = (int(action_counts),) * n
    action_counts = tuple(int(k) for k in action_counts)
    if n < 1 or state_count < 1 or len(action_counts) != n or min(action_counts) < 1:
        raise ValueError(
            f"degenerate sizes: n={n}, states={state_count}, actions={action_counts}"
        )
    lo, hi = map(float, reward_range)
    if not lo <= hi:
        raise ValueError(f"empty reward range {reward_range}")
    gamma = _check_gamma(gamma)
    rng = np.random.default_rng(seed)
    J = math.prod(action_counts)
    P = rng.random((state_count, J, state_count)) + 1e-3
    P /= P.sum(axis=2, keepdims=True)
    R = rng.uniform(lo, hi, size=(n, state_count, J))
    return MarkovGame(
        action_counts=action_counts,
        rewards=R,
        transitions=P,
        gamma=gamma,
        rho0=np.full(state_count, 1.0 / state_count),
        reward_bound=max(abs(lo), abs(hi)),
        name=f"random-{seed}",
    )


BUILTIN_GAMES = {
    "matching-pennies": build_matching_pennies,
    "biased-pennies": build_biased_pennies,
    "soccer": build_soccer,
    "cournot": build_cournot,
}


def builtin_game(name: str) -> MarkovGame:
    try:
        return BUILTIN_GAMES[name]()
    except KeyError:
        raise ValueError(f"unknown built-in game '{name}'; choose from {sorted(BUILTIN_GAMES)}") from None
