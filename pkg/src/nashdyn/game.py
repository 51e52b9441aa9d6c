"""Finite Markov-game data model, validation and the JSON game-file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_TOL = 1e-9

JOINT_INDEX_NOTE = (
    "joint action index j is row-major with player 1 most significant: "
    "j = a1*|A2|*...*|An| + a2*|A3|*...*|An| + ... + an"
)

# Above this many transition entries products go through a sparse copy.
_SPARSE_THRESHOLD = 200_000


class GameParseError(ValueError):
    """A game file could not be read into the expected fields."""


class GameValidationError(ValueError):
    """A game was parsed but violates a model invariant."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        head = "; ".join(violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"invalid game: {head}{more}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MarkovGame:
    """Tabular n-player Markov game.

    ``rewards`` has shape ``(n, S, J)`` and ``transitions`` shape ``(S, J, S)``
    where ``J`` is the number of joint actions (see :func:`encode_joint`).
    Instances are immutable; arrays are flagged read-only.
    """

    action_counts: tuple[int, ...]
    rewards: np.ndarray
    transitions: np.ndarray
    gamma: float
    rho0: np.ndarray
    reward_bound: float | None = None
    state_labels: tuple[str, ...] | None = None
    action_labels: tuple[tuple[str, ...], ...] | None = None
    name: str = "game"

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(a) for a in self.action_counts))
        object.__setattr__(self, "rewards", _frozen(self.rewards))
        object.__setattr__(self, "transitions", _frozen(self.transitions))
        object.__setattr__(self, "rho0", _frozen(self.rho0))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.reward_bound is None:
            bound = float(np.abs(self.rewards).max()) if self.rewards.size else 0.0
            object.__setattr__(self, "reward_bound", bound)
        if self.state_labels is not None:
            object.__setattr__(self, "state_labels", tuple(self.state_labels))
        if self.action_labels is not None:
            object.__setattr__(
                self, "action_labels", tuple(tuple(x) for x in self.action_labels)
            )

    @property
    def n_players(self) -> int:
        return len(self.action_counts)

    @property
    def state_count(self) -> int:
        return self.transitions.shape[0]

    @property
    def joint_count(self) -> int:
        return math.prod(self.action_counts)

    @property
    def r_max(self) -> float:
        return float(self.reward_bound)

    @cached_property
    def flat_transitions(self):
        """Transitions as an ``(S*J, S)`` matrix, sparse for large games."""
        S, J = self.state_count, self.joint_count
        flat = self.transitions.reshape(S * J, S)
        if flat.size > _SPARSE_THRESHOLD:
            from scipy import sparse

            return sparse.csr_matrix(flat)
        return flat

    @cached_property
    def is_sparse(self) -> bool:
        return not isinstance(self.flat_transitions, np.ndarray)

    def __eq__(self, other):
        if not isinstance(other, MarkovGame):
            return NotImplemented
        return (
            self.action_counts == other.action_counts
            and self.gamma == other.gamma
            and self.reward_bound == other.reward_bound
            and self.state_labels == other.state_labels
            and self.action_labels == other.action_labels
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.rho0, other.rho0)
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# joint-action indexing


def encode_joint(actions: Sequence[int], action_counts: Sequence[int]) -> int:
    j = 0
    for a, k in zip(actions, action_counts):
        if not 0 <= a < k:
            raise ValueError(f"action {a} out of range for {k} actions")
        j = j * k + int(a)
    return j


def decode_joint(j: int, action_counts: Sequence[int]) -> tuple[int, ...]:
    out = []
    for k in reversed(action_counts):
        j, a = divmod(j, k)
        out.append(a)
    if j != 0:
        raise ValueError("joint index out of range")
    return tuple(reversed(out))


def joint_action_table(action_counts: Sequence[int]) -> np.ndarray:
    """``(J, n)`` integer table whose row j is the decoded joint action."""
    grids = np.indices(tuple(action_counts)).reshape(len(action_counts), -1)
    return grids.T.copy()


# ---------------------------------------------------------------------------
# policy profiles
#
# A profile is a list with one (S, |A^i|) row-stochastic array per player.


def uniform_profile(game: MarkovGame) -> list[np.ndarray]:
    S = game.state_count
    return [np.full((S, k), 1.0 / k) for k in game.action_counts]


def deterministic_profile(game: MarkovGame, actions: Sequence[int | Sequence[int]]) -> list[np.ndarray]:
    """Profile where player i plays ``actions[i]`` (one action or one per state)."""
    S = game.state_count
    profile = []
    for k, a in zip(game.action_counts, actions):
        idx = np.broadcast_to(np.asarray(a, dtype=int), (S,))
        pi = np.zeros((S, k))
        pi[np.arange(S), idx] = 1.0
        profile.append(pi)
    return profile


def profile_violations(game: MarkovGame, profile: Sequence[np.ndarray], tol: float = ROW_TOL) -> list[str]:
    if len(profile) != game.n_players:
        return [f"profile has {len(profile)} players, game has {game.n_players}"]
    out = []
    for i, (pi, k) in enumerate(zip(profile, game.action_counts)):
        pi = np.asarray(pi)
        if pi.shape != (game.state_count, k):
            out.append(f"player {i}: policy shape {pi.shape}, expected {(game.state_count, k)}")
            continue
        if not np.all(np.isfinite(pi)):
            out.append(f"player {i}: non-finite probabilities")
            continue
        for s in np.flatnonzero(pi.min(axis=1) < -tol):
            out.append(f"player {i}: negative probability at state {s}")
        for s in np.flatnonzero(np.abs(pi.sum(axis=1) - 1.0) > tol):
            out.append(f"player {i}: row at state {s} sums to {pi[s].sum():.12g}")
    return out


def check_profile(game: MarkovGame, profile: Sequence[np.ndarray]) -> list[np.ndarray]:
    problems = profile_violations(game, profile)
    if problems:
        raise ValueError("invalid profile: " + "; ".join(problems[:5]))
    return [np.asarray(p, dtype=float) for p in profile]


def joint_policy(profile: Sequence[np.ndarray]) -> np.ndarray:
    """Per-state product distribution over joint actions, shape ``(S, J)``."""
    joint = np.asarray(profile[0], dtype=float)
    S = joint.shape[0]
    for pi in profile[1:]:
        joint = (joint[:, :, None] * pi[:, None, :]).reshape(S, -1)
    return joint


# ---------------------------------------------------------------------------
# validation


def validate_game(game: MarkovGame, tol: float = ROW_TOL) -> list[str]:
    """Return every invariant violation; an empty list means the game is valid."""
    out: list[str] = []
    n, S, J = game.n_players, game.state_count, game.joint_count
    if n < 1:
        out.append("game has no players")
    if any(k < 1 for k in game.action_counts):
        out.append(f"action counts must be positive, got {game.action_counts}")
    if not 0.0 < game.gamma < 1.0:
        out.append(f"gamma={game.gamma} not in (0, 1)")
    if game.rewards.shape != (n, S, J):
        out.append(f"rewards shape {game.rewards.shape}, expected {(n, S, J)}")
    if game.transitions.shape != (S, J, S):
        out.append(f"transitions shape {game.transitions.shape}, expected {(S, J, S)}")
    if game.rho0.shape != (S,):
        out.append(f"rho0 shape {game.rho0.shape}, expected {(S,)}")
    if out:
        return out

    if not np.all(np.isfinite(game.rewards)):
        out.append("rewards contain non-finite values")
    elif np.abs(game.rewards).max(initial=0.0) > game.r_max + tol:
        out.append(f"reward magnitude exceeds declared bound {game.r_max}")

    P = game.transitions
    for s, j, t in zip(*np.nonzero(P < -tol)):
        out.append(f"negative transition probability P[{s}][{j}][{t}]={P[s, j, t]:.12g}")
    sums = P.sum(axis=2)
    for s, j in zip(*np.nonzero(np.abs(sums - 1.0) > tol)):
        out.append(f"transition row state {s}, joint action {j} sums to {sums[s, j]:.12g}")

    for s in np.flatnonzero(game.rho0 < -tol):
        out.append(f"rho0[{s}]={game.rho0[s]:.12g} is negative")
    if abs(game.rho0.sum() - 1.0) > tol:
        out.append(f"rho0 sums to {game.rho0.sum():.12g}")

    if game.state_labels is not None and len(game.state_labels) != S:
        out.append("state label count does not match state count")
    if game.action_labels is not None and tuple(len(x) for x in game.action_labels) != game.action_counts:
        out.append("action label counts do not match action counts")
    return out


def is_zero_sum(game: MarkovGame, tol: float = 0.0) -> bool:
    return bool(np.abs(game.rewards.sum(axis=0)).max() <= tol)


# ---------------------------------------------------------------------------
# game files


def _fmt(x) -> str:
    if isinstance(x, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in x) + "]"
    v = float(x)
    if v == 0.0:
        return "0"
    return format(v, ".17g")


def _fmt_array(a: np.ndarray) -> str:
    return _fmt(np.asarray(a).tolist())


def dumps_game(game: MarkovGame) -> str:
    fields = [
        ("comment", json.dumps(JOINT_INDEX_NOTE)),
        ("name", json.dumps(game.name)),
        ("players", str(game.n_players)),
        ("gamma", _fmt(game.gamma)),
        ("reward_bound", _fmt(game.r_max)),
        ("action_counts", json.dumps(list(game.action_counts))),
        ("rho0", _fmt_array(game.rho0)),
    ]
    if game.state_labels is not None or game.action_labels is not None:
        labels = {}
        if game.state_labels is not None:
            labels["states"] = list(game.state_labels)
        if game.action_labels is not None:
            labels["actions"] = [list(x) for x in game.action_labels]
        fields.append(("labels", json.dumps(labels)))
    fields.append(("rewards", _fmt_array(game.rewards)))
    fields.append(("transitions", _fmt_array(game.transitions)))
    body = ",\n".join(f'  "{k}": {v}' for k, v in fields)
    return "{\n" + body + "\n}\n"


def save_game(game: MarkovGame, path: str | Path) -> None:
    Path(path).write_text(dumps_game(game))


_REQUIRED = ("players", "gamma", "rho0", "action_counts", "rewards", "transitions")


def game_from_dict(doc: dict) -> MarkovGame:
    """Build a game from a parsed document. Raises GameParseError or GameValidationError."""
    if not isinstance(doc, dict):
        raise GameParseError("game document must be a JSON object")
    for key in _REQUIRED:
        if key not in doc:
            raise GameParseError(f"missing field '{key}'")
    try:
        action_counts = tuple(int(a) for a in doc["action_counts"])
        players = int(doc["players"])
        gamma = float(doc["gamma"])
        rho0 = np.asarray(doc["rho0"], dtype=float)
        rewards = np.asarray(doc["rewards"], dtype=float)
        transitions = np.asarray(doc["transitions"], dtype=float)
        bound = doc.get("reward_bound")
        bound = None if bound is None else float(bound)
    except (TypeError, ValueError) as exc:
        raise GameParseError(f"malformed numeric field: {exc}") from exc
    if players != len(action_counts):
        raise GameParseError(f"players={players} but {len(action_counts)} action counts given")
    if transitions.ndim != 3:
        raise GameParseError("'transitions' must be a [state][joint][state'] array")
    labels = doc.get("labels") or {}
    game = MarkovGame(
        action_counts=action_counts,
        rewards=rewards,
        transitions=transitions,
        gamma=gamma,
        rho0=rho0,
        reward_bound=bound,
        state_labels=labels.get("states"),
        action_labels=labels.get("actions"),
        name=str(doc.get("name", "game")),
    )
    problems = validate_game(game)
    if problems:
        raise GameValidationError(problems)
    return game


def load_game(path: str | Path) -> MarkovGame:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameParseError(f"{path}: not valid JSON ({exc})") from exc
    return game_from_dict(doc)


@dataclass
class ProfileFile:
    """On-disk policy profile: ``{"policies": [[[p, ...], ...], ...]}``."""

    policies: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> "ProfileFile":
        doc = json.loads(Path(path).read_text())
        try:
            return cls([np.asarray(p, dtype=float) for p in doc["policies"]])
        except (KeyError, TypeError) as exc:
            raise GameParseError(f"{path}: expected a 'policies' list") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text('{"policies": ' + _fmt([p.tolist() for p in self.policies]) + "}\n")
