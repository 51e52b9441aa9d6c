"""Monte-Carlo estimation for the sample-based discrete dynamics (tabular EPO).

Players only see sampled trajectories: returns, a running empirical value
table, and importance-weighted estimates of their weighted advantage.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import DynamicsConfig, ScoreState, run_dtld, zero_scores
from .evaluation import evaluate
from .game import MarkovGame
from .trace import LearningTrace

MODES = ("unbiased", "gae", "exact")
BASELINE_PLACEMENTS = ("sample", "state")

# Episodes simulated per vectorised chunk; fixed so random streams do not
# depend on how many episodes are requested in total.
CHUNK = 4096


def default_horizon(gamma: float, tail_tol: float = 1e-3) -> int:
    return max(1, math.ceil(math.log(tail_tol) / math.log(gamma)))


def truncation_bound(game: MarkovGame, horizon: int) -> float:
    """Bound on the discounted reward mass lost by truncating at ``horizon``."""
    return game.gamma ** horizon * game.r_max / (1.0 - game.gamma)


def episode_rng(seed: int, *counters: int) -> np.random.Generator:
    """Counter-based stream: independent per (seed, counters) and reproducible."""
    return np.random.default_rng([int(seed), *map(int, counters)])


@dataclass(frozen=True)
class Trajectory:
    """A batch of equal-length episodes.

    ``states`` is ``(M, H+1)``; ``actions`` ``(M, H, n)``; ``joint`` ``(M, H)``;
    ``rewards`` ``(n, M, H)``.
    """

    states: np.ndarray
    actions: np.ndarray
    joint: np.ndarray
    rewards: np.ndarray

    @property
    def episodes(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.joint.shape[1]


def _sample_rows(cdf_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(cdf_rows))
    idx = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


def rollouts(game: MarkovGame, profile: Sequence[np.ndarray], episodes: int, horizon: int,
             rng: np.random.Generator) -> Trajectory:
    if horizon < 1 or episodes < 1:
        raise ValueError("need at least one episode of at least one step")
    n = game.n_players
    policy_cdf = [np.cumsum(np.asarray(p, dtype=float), axis=1) for p in profile]
    strides = np.array([math.prod(game.action_counts[i + 1:]) for i in range(n)])
    M, H = episodes, horizon
    states = np.empty((M, H + 1), dtype=np.int64)
    actions = np.empty((M, H, n), dtype=np.int64)
    joint = np.empty((M, H), dtype=np.int64)
    rewards = np.empty((n, M, H))
    rho_cdf = np.cumsum(game.rho0)
    states[:, 0] = _sample_rows(np.broadcast_to(rho_cdf, (M, len(rho_cdf))), rng)
    P = game.transitions
    for k in range(H):
        s = states[:, k]
        for i in range(n):
            actions[:, k, i] = _sample_rows(policy_cdf[i][s], rng)
        j = actions[:, k] @ strides
        joint[:, k] = j
        rewards[:, :, k] = game.rewards[:, s, j]
        states[:, k + 1] = _sample_rows(np.cumsum(P[s, j], axis=1), rng)
    return Trajectory(states, actions, joint, rewards)


def rollout(game: MarkovGame, profile: Sequence[np.ndarray], horizon: int,
            rng: np.random.Generator) -> Trajectory:
    """Single episode (a batch of one)."""
    return rollouts(game, profile, 1, horizon, rng)


def returns(traj: Trajectory, gamma: float, player: int) -> np.ndarray:
    """Truncated discounted returns ``G_k = r_k + gamma G_{k+1}``, shape ``(M, H)``."""
    r = traj.rewards[player]
    G = np.empty_like(r)
    acc = np.zeros(r.shape[0])
    for k in range(r.shape[1] - 1, -1, -1):
        acc = r[:, k] + gamma * acc
        G[:, k] = acc
    return G


def gae(traj: Trajectory, values: np.ndarray, gamma: float, lam: float, player: int) -> np.ndarray:
    """Lambda-weighted sum of TD residuals under the state-value table ``values`` (per player)."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    V = np.asarray(values)
    V = V[player] if V.ndim == 2 else V
    r = traj.rewards[player]
    delta = r + gamma * V[traj.states[:, 1:]] - V[traj.states[:, :-1]]
    adv = np.empty_like(delta)
    acc = np.zeros(delta.shape[0])
    for k in range(delta.shape[1] - 1, -1, -1):
        acc = delta[:, k] + gamma * lam * acc
        adv[:, k] = acc
    return adv


@dataclass
class EmpiricalValueTable:
    """Discount-weighted running average of observed returns per state.

    ``window`` keeps only the last ``window`` updates (``None``: full history).
    """

    n_players: int
    state_count: int
    window: int | None = None
    value_sum: np.ndarray = field(init=False)
    weight: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value_sum = np.zeros((self.n_players, self.state_count))
        self.weight = np.zeros(self.state_count)
        self._history: deque = deque()

    def update(self, traj: Trajectory, gamma: float, G: Sequence[np.ndarray] | None = None) -> "EmpiricalValueTable":
        if G is None:
            G = [returns(traj, gamma, i) for i in range(self.n_players)]
        disc = gamma ** np.arange(traj.horizon)
        s = traj.states[:, :-1].ravel()
        w = np.broadcast_to(disc, traj.states[:, :-1].shape).ravel()
        d_weight = np.bincount(s, weights=w, minlength=self.state_count)
        d_value = np.stack([
            np.bincount(s, weights=(w * np.asarray(G[i]).ravel()), minlength=self.state_count)
            for i in range(self.n_players)
        ])
        self.value_sum += d_value
        self.weight += d_weight
        if self.window is not None:
            self._history.append((d_value, d_weight))
            while len(self._history) > self.window:
                old_v, old_w = self._history.popleft()
                self.value_sum -= old_v
                self.weight -= old_w
                np.maximum(self.weight, 0.0, out=self.weight)
        return self

    def estimate(self) -> np.ndarray:
        """``V_hat`` of shape (n, S); zero where nothing was observed."""
        out = np.zeros_like(self.value_sum)
        seen = self.weight > 0
        out[:, seen] = self.value_sum[:, seen] / self.weight[seen]
        return out


def update_empirical_values(table: EmpiricalValueTable, traj: Trajectory, gamma: float) -> EmpiricalValueTable:
    return table.update(traj, gamma)


@dataclass(frozen=True)
class WhatEstimate:
    mean: list[np.ndarray]        # per player (S, |A^i|)
    variance: list[np.ndarray]    # per-episode sample variance, per entry
    episodes: int

    def standard_error(self) -> list[np.ndarray]:
        return [np.sqrt(v / self.episodes) for v in self.variance]


def _episode_contributions(traj: Trajectory, policy: np.ndarray, player: int, signal: np.ndarray,
                           gamma: float, baseline: np.ndarray | None, state_level: bool) -> np.ndarray:
    """Per-episode importance-weighted sums, shape (M, S*k)."""
    M, H = traj.episodes, traj.horizon
    S, k = policy.shape
    s = traj.states[:, :-1]
    a = traj.actions[:, :, player]
    disc = gamma ** np.arange(H)
    prob = policy[s, a]
    if np.any(prob <= 0):
        raise ZeroDivisionError("sampled an action with zero probability; profile is corrupted")
    episode = np.repeat(np.arange(M), H)
    cell = (episode * (S * k) + (s * k + a).ravel())
    out = np.bincount(cell, weights=(disc * signal / prob).ravel(), minlength=M * S * k)
    out = out.reshape(M, S, k)
    if state_level and baseline is not None:
        visits = np.bincount((episode * S + s.ravel()), weights=np.broadcast_to(disc, s.shape).ravel(),
                             minlength=M * S).reshape(M, S)
        out -= (visits * baseline[None, :])[:, :, None]
    return out.reshape(M, S * k)


def estimate_w(game: MarkovGame, profile: Sequence[np.ndarray], episodes: int, horizon: int,
               rng: np.random.Generator, mode: str = "unbiased", values: np.ndarray | None = None,
               lam: float = 0.95, baseline: str = "sample",
               trajectories: Trajectory | None = None) -> WhatEstimate:
    """Estimate every player's weighted advantage ``rho(s) A^i(s, a)`` from rollouts.

    ``mode="unbiased"`` weights ``G_k - b(s_k)`` by ``gamma^k 1[a_k = a] / pi(a|s_k)``
    with ``b`` the value table ``values`` (zeros if omitted). ``baseline="state"``
    instead subtracts ``b(s)`` once per discounted visit of ``s`` for every
    action, which leaves the soft-max policy exactly unchanged by ``b``.
    ``mode="gae"`` uses the lambda-GAE advantage in place of ``G_k - b(s_k)``.
    ``mode="exact"`` skips sampling and returns the exact operator.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if baseline not in BASELINE_PLACEMENTS:
        raise ValueError(f"baseline must be one of {BASELINE_PLACEMENTS}")
    n, S = game.n_players, game.state_count
    if mode == "exact":
        w = evaluate(game, profile).w
        return WhatEstimate(mean=w, variance=[np.zeros_like(x) for x in w], episodes=episodes)
    if episodes < 1:
        raise ValueError("need at least one episode")
    V = np.zeros((n, S)) if values is None else np.asarray(values, dtype=float).reshape(n, S)
    policies = [np.asarray(p, dtype=float) for p in profile]
    sums = [np.zeros(S * k) for k in game.action_counts]
    sq = [np.zeros(S * k) for k in game.action_counts]

    batches = [trajectories] if trajectories is not None else None
    remaining = episodes
    chunk_id = 0
    while (batches is not None and batches) or (batches is None and remaining > 0):
        if batches is not None:
            traj = batches.pop()
        else:
            size = min(CHUNK, remaining)
            traj = rollouts(game, policies, size, horizon, rng)
            remaining -= size
            chunk_id += 1
        for i in range(n):
            if mode == "unbiased":
                G = returns(traj, game.gamma, i)
                if baseline == "sample":
                    signal = G - V[i][traj.states[:, :-1]]
                    c = _episode_contributions(traj, policies[i], i, signal, game.gamma, None, False)
                else:
                    c = _episode_contributions(traj, policies[i], i, G, game.gamma, V[i], True)
            else:
                signal = gae(traj, V, game.gamma, lam, i)
                c = _episode_contributions(traj, policies[i], i, signal, game.gamma, None, False)
            sums[i] += c.sum(axis=0)
            sq[i] += (c * c).sum(axis=0)
    M = episodes if trajectories is None else trajectories.episodes
    mean, var = [], []
    for i, k in enumerate(game.action_counts):
        m = sums[i] / M
        v = (sq[i] - M * m * m) / (M - 1) if M > 1 else np.zeros_like(m)
        mean.append(m.reshape(S, k))
        var.append(np.maximum(v, 0.0).reshape(S, k))
    return WhatEstimate(mean=mean, variance=var, episodes=M)


def run_tabular_epo(game: MarkovGame, config: DynamicsConfig, episodes: int, horizon: int | None = None,
                    lam: float = 0.95, mode: str = "gae", seed: int = 0,
                    y0: Sequence[np.ndarray] | None = None, window: int | None = None,
                    baseline: str = "sample", baseline_shift: np.ndarray | None = None,
                    trace_every: int = 1, nashconv_every: int = 0, record_wall_time: bool = False,
                    policy_log: list | None = None) -> tuple[ScoreState, LearningTrace]:
    """Sample-based discrete dynamics with tabular scores.

    Iteration ``l`` rolls out ``sigma(y_l)`` for ``episodes`` episodes on the
    counter-based stream ``(seed, l)``, folds the returns into the empirical
    value table, estimates ``w_hat`` against that table and applies the
    discrete score update. ``mode="exact"`` reproduces :func:`run_dtld`.
    ``baseline_shift`` (per player and state) is added to the value table
    before it is used as a baseline. ``policy_log`` collects the profile played
    at every iteration.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    horizon = horizon or default_horizon(game.gamma)
    trace = LearningTrace(record_wall_time=record_wall_time,
                          constants={"M": episodes, "H": horizon, "mode": mode, "seed": seed})
    if mode == "exact":
        return run_dtld(game, y0, config, trace_every=trace_every, nashconv_every=nashconv_every,
                        record_wall_time=record_wall_time, trace=trace)

    table = EmpiricalValueTable(game.n_players, game.state_count, window=window)
    shift = None if baseline_shift is None else np.asarray(baseline_shift, dtype=float).reshape(
        game.n_players, game.state_count)

    def estimator(l, profile):
        if policy_log is not None:
            policy_log.append([p.copy() for p in profile])
        rng = episode_rng(seed, l)
        trajs = rollouts(game, profile, episodes, horizon, rng)
        table.update(trajs, game.gamma)
        V = table.estimate()
        if shift is not None:
            V = V + shift
        est = estimate_w(game, profile, episodes, horizon, rng, mode=mode, values=V, lam=lam,
                         baseline=baseline, trajectories=trajs)
        return est.mean

    return run_dtld(game, y0 if y0 is not None else zero_scores(game), config, estimator=estimator,
                    trace_every=trace_every, nashconv_every=nashconv_every,
                    record_wall_time=record_wall_time, trace=trace)
