"""Exact evaluation of a policy profile by dense linear algebra."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import lapack

from .game import MarkovGame, joint_policy


@dataclass(frozen=True)
class EvalReport:
    rho: np.ndarray          # (S,) discounted visitation, sums to 1/(1-gamma)
    V: np.ndarray            # (n, S)
    Q: list[np.ndarray]      # per player (S, |A^i|)
    A: list[np.ndarray]
    u: np.ndarray            # (n,)
    w: list[np.ndarray]      # rho(s) * A^i(s, a)

    def to_csv(self, path: str | Path) -> None:
        """One row per (player, state, action)."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["player", "state", "action", "rho", "V", "Q", "A", "w", "u"])
            for i, (Q, A, w) in enumerate(zip(self.Q, self.A, self.w)):
                for s in range(Q.shape[0]):
                    for a in range(Q.shape[1]):
                        out.writerow([i, s, a] + [
                            repr(float(x)) for x in
                            (self.rho[s], self.V[i, s], Q[s, a], A[s, a], w[s, a], self.u[i])
                        ])


def _transition_times(game: MarkovGame, vectors: np.ndarray) -> np.ndarray:
    """``sum_s' P(s'|s, j) v(s')`` for each column of ``vectors``; shape (S, J, k)."""
    S, J = game.state_count, game.joint_count
    out = game.flat_transitions @ vectors
    return np.asarray(out).reshape(S, J, -1)


def profile_transition(game: MarkovGame, profile: Sequence[np.ndarray]) -> np.ndarray:
    """State-to-state matrix ``P_pi(s'|s)`` induced by the profile."""
    return _joint_transition(game, joint_policy(profile))


def _joint_transition(game: MarkovGame, joint: np.ndarray) -> np.ndarray:
    if joint.shape != (game.state_count, game.joint_count):
        raise ValueError(
            f"profile induces joint shape {joint.shape}, game needs "
            f"{(game.state_count, game.joint_count)}"
        )
    if game.is_sparse:
        from scipy import sparse

        S, J = joint.shape
        rows = np.repeat(np.arange(S), J)
        cols = np.arange(S * J)
        weights = sparse.csr_matrix((joint.ravel(), (rows, cols)), shape=(S, S * J))
        return (weights @ game.flat_transitions).toarray()
    return (joint[:, None, :] @ game.transitions)[:, 0, :]


class _Resolvent:
    """Solves with ``M = I - gamma P_pi`` from one LU factorisation.

    Calls LAPACK getrf/getrs directly: for the small systems this package
    mostly solves, the checking wrappers cost more than the arithmetic.
    """

    def __init__(self, game: MarkovGame, P_pi: np.ndarray):
        M = np.eye(game.state_count) - game.gamma * P_pi
        self.lu, self.piv, info = lapack.dgetrf(M)
        if info != 0:
            raise np.linalg.LinAlgError(f"I - gamma P_pi is singular (getrf info={info})")

    def solve(self, b: np.ndarray) -> np.ndarray:
        return lapack.dgetrs(self.lu, self.piv, b)[0]

    def solve_transposed(self, b: np.ndarray) -> np.ndarray:
        return lapack.dgetrs(self.lu, self.piv, b, trans=1)[0]


def visitation(game: MarkovGame, profile: Sequence[np.ndarray]) -> np.ndarray:
    """Discounted visitation ``rho`` solving ``(I - gamma P_pi^T) rho = rho0``."""
    return _Resolvent(game, profile_transition(game, profile)).solve_transposed(game.rho0)


@lru_cache(maxsize=None)
def _marginal_einsum(n: int, i: int) -> str:
    letters = "abcdefghijklmnopqr"[:n]
    terms = [f"s{letters}"] + [f"s{letters[k]}" for k in range(n) if k != i]
    return ",".join(terms) + f"->s{letters[i]}"


def marginalize(values: np.ndarray, profile: Sequence[np.ndarray], player: int) -> np.ndarray:
    """Expectation over the opponents' joint actions.

    ``values`` has a trailing joint-action axis of size J; the result has the
    player's own action axis in its place.
    """
    n = len(profile)
    S = values.shape[0]
    counts = [p.shape[1] for p in profile]
    tensor = values.reshape(S, *counts)
    if n == 1:
        return tensor.copy()
    if n == 2:
        # batched matmul is several times cheaper than einsum at this size
        if player == 0:
            return (tensor @ profile[1][:, :, None])[:, :, 0]
        return (profile[0][:, None, :] @ tensor)[:, 0, :]
    others = [profile[k] for k in range(n) if k != player]
    return np.einsum(_marginal_einsum(n, player), tensor, *others)


def evaluate(game: MarkovGame, profile: Sequence[np.ndarray]) -> EvalReport:
    n = game.n_players
    joint = joint_policy(profile)
    res = _Resolvent(game, _joint_transition(game, joint))
    rho = res.solve_transposed(game.rho0)

    r_bar = (game.rewards * joint).sum(axis=2).T                   # (S, n)
    V = res.solve(r_bar).T                                          # (n, S)
    nextV = _transition_times(game, V.T)                            # (S, J, n)

    Q, A, w = [], [], []
    for i in range(n):
        q_joint = game.rewards[i] + game.gamma * nextV[:, :, i]
        Qi = marginalize(q_joint, profile, i)
        Ai = Qi - V[i][:, None]
        Q.append(Qi)
        A.append(Ai)
        w.append(rho[:, None] * Ai)
    u = V @ game.rho0
    return EvalReport(rho=rho, V=V, Q=Q, A=A, u=u, w=w)


def weighted_advantage(game: MarkovGame, profile: Sequence[np.ndarray]) -> list[np.ndarray]:
    return evaluate(game, profile).w


def payoffs(game: MarkovGame, profile: Sequence[np.ndarray]) -> np.ndarray:
    """Per-player payoff ``u^i = sum_s rho0(s) V^i(s)``."""
    joint = joint_policy(profile)
    r_bar = np.einsum("isj,sj->si", game.rewards, joint)
    return _Resolvent(game, _joint_transition(game, joint)).solve(r_bar).T @ game.rho0


def policy_update_identity_check(game: MarkovGame, profile: Sequence[np.ndarray],
                                 player: int, alt_policy: np.ndarray) -> float:
    """Residual of the performance-difference identity for a unilateral switch.

    ``u(alt) - u(pi) = sum_s rho_alt(s) sum_a alt(s, a) A_pi(s, a)``, where
    ``rho_alt`` is the visitation under the deviated profile.
    """
    base = evaluate(game, profile)
    deviated = list(profile)
    deviated[player] = np.asarray(alt_policy, dtype=float)
    after = evaluate(game, deviated)
    predicted = float(np.sum(after.rho[:, None] * deviated[player] * base.A[player]))
    return abs(after.u[player] - base.u[player] - predicted)
