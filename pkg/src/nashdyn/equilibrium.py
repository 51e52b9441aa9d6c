"""Best-response oracles, NashConv and the logit (regularized) response."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evaluation import _Resolvent, _transition_times, evaluate, marginalize, payoffs, profile_transition
from .game import MarkovGame, joint_policy
from .parallel import parallel_map

_LETTERS = "abcdefghijklmnopqr"


class OracleError(RuntimeError):
    """Best-response oracle exceeded its iteration cap."""


@dataclass(frozen=True)
class InducedMDP:
    """Single-agent MDP faced by one player when the others are frozen."""

    rewards: np.ndarray       # (S, A)
    transitions: np.ndarray   # (S, A, S)
    gamma: float
    rho0: np.ndarray


@dataclass(frozen=True)
class BestResponse:
    policy: np.ndarray        # deterministic (S, A) policy
    payoff: float
    iterations: int
    values: np.ndarray


@dataclass(frozen=True)
class NashConvReport:
    gaps: np.ndarray
    total: float
    best_payoffs: np.ndarray
    payoffs: np.ndarray

    def csv_row(self, iteration) -> list:
        return [iteration, *(repr(float(g)) for g in self.gaps), repr(float(self.total))]

    @staticmethod
    def csv_header(n_players: int) -> list[str]:
        return ["iteration", *(f"gap_{i}" for i in range(n_players)), "total"]


def write_nashconv_csv(path, reports: Sequence[tuple[int, NashConvReport]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        n = len(reports[0][1].gaps) if reports else 0
        out.writerow(NashConvReport.csv_header(n))
        for it, rep in reports:
            out.writerow(rep.csv_row(it))


def induced_mdp(game: MarkovGame, profile: Sequence[np.ndarray], player: int) -> InducedMDP:
    """Average rewards and transitions over the opponents' mixed actions."""
    S, n = game.state_count, game.n_players
    counts = [p.shape[1] for p in profile]
    R = marginalize(game.rewards[player], profile, player)
    tensor = game.transitions.reshape(S, *counts, S)
    if n == 1:
        P = tensor.copy()
    else:
        letters = _LETTERS[:n]
        spec = ",".join([f"s{letters}t"] + [f"s{letters[k]}" for k in range(n) if k != player])
        spec += f"->s{letters[player]}t"
        P = np.einsum(spec, tensor, *[profile[k] for k in range(n) if k != player])
    return InducedMDP(rewards=R, transitions=P, gamma=game.gamma, rho0=np.asarray(game.rho0))


def _greedy(Q: np.ndarray, current: np.ndarray | None, tol: float) -> np.ndarray:
    """Greedy actions, lowest index among the near-maximal ones.

    The current action is kept unless it is worse than the best by more than
    ``tol``, which rules out cycling between tied policies.
    """
    best = Q.max(axis=1, keepdims=True)
    lowest = np.argmax(Q >= best - tol, axis=1)
    if current is None:
        return lowest
    keep = Q[np.arange(len(Q)), current] >= best[:, 0] - tol
    return np.where(keep, current, lowest)


def _one_hot(actions: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(actions), k))
    out[np.arange(len(actions)), actions] = 1.0
    return out


def _player_q(game: MarkovGame, profile: Sequence[np.ndarray], player: int, V: np.ndarray) -> np.ndarray:
    nextV = _transition_times(game, V[:, None])[:, :, 0]
    return marginalize(game.rewards[player] + game.gamma * nextV, profile, player)


def best_response(game: MarkovGame, profile: Sequence[np.ndarray], player: int,
                  tol: float = 1e-10) -> BestResponse:
    """Policy iteration on the player's induced MDP.

    Ties go to the lowest action index. Raises :class:`OracleError` if more
    than ``10 * |S|`` improvement rounds are needed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    S, k = game.state_count, game.action_counts[player]
    prof = [np.asarray(p, dtype=float) for p in profile]
    R_tilde = marginalize(game.rewards[player], prof, player)
    actions = _greedy(R_tilde, None, tol)
    cap = 10 * S + 1
    for it in range(1, cap + 1):
        prof[player] = _one_hot(actions, k)
        r_bar = np.einsum("sj,sj->s", game.rewards[player], joint_policy(prof))
        V = _Resolvent(game, profile_transition(game, prof)).solve(r_bar)
        Q = _player_q(game, prof, player, V)
        new = _greedy(Q, actions, tol)
        if np.array_equal(new, actions):
            return BestResponse(policy=_one_hot(actions, k), payoff=float(V @ game.rho0),
                                iterations=it, values=V)
        actions = new
    raise OracleError(f"policy iteration did not settle within {cap} rounds")


def value_iteration(mdp: InducedMDP, tol: float = 1e-12, max_iters: int = 100_000) -> tuple[np.ndarray, float]:
    """Independent optimal-value oracle; returns (V*, payoff)."""
    V = np.zeros(mdp.rewards.shape[0])
    for _ in range(max_iters):
        new = (mdp.rewards + mdp.gamma * mdp.transitions @ V).max(axis=1)
        if np.abs(new - V).max() < tol * (1 - mdp.gamma):
            V = new
            break
        V = new
    return V, float(mdp.rho0 @ V)


def nash_conv(game: MarkovGame, profile: Sequence[np.ndarray], tol: float = 1e-10,
              workers: int = 1) -> NashConvReport:
    current = payoffs(game, profile)
    brs = parallel_map(lambda i: best_response(game, profile, i, tol),
                       range(game.n_players), workers)
    best = np.array([br.payoff for br in brs])
    gaps = best - current
    return NashConvReport(gaps=gaps, total=float(gaps.sum()), best_payoffs=best, payoffs=current)


def softmax_rows(scores: np.ndarray, epsilon: float) -> np.ndarray:
    z = np.asarray(scores, dtype=float) / epsilon
    z -= z.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


def logit_response(game: MarkovGame, profile: Sequence[np.ndarray], player: int,
                   epsilon: float) -> np.ndarray:
    """Soft-max of the player's own weighted advantage at the given profile."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return softmax_rows(evaluate(game, profile).w[player], epsilon)
