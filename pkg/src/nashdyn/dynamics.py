"""Score-based learning dynamics: continuous time (RK4) and discrete time.

Each player keeps a score table ``y^i[s, a]``. Scores relax towards the weighted
advantage of the policy profile they induce through a soft-max choice map::

    dy/dt = eta * (w(sigma(y)) - y)                      (continuous time)
    y_{l+1} = y_l + alpha_l * eta * (w_hat_l - y_l)       (discrete time)
"""

from __future__ import annotations

import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .equilibrium import nash_conv, softmax_rows
from .evaluation import evaluate, payoffs
from .game import MarkovGame
from .trace import LearningTrace

Scores = list[np.ndarray]
Estimator = Callable[[int, list[np.ndarray]], Scores]


# ---------------------------------------------------------------------------
# regularizer


class Regularizer(ABC):
    """Strongly convex per-state penalty ``h`` with its soft-argmax choice map."""

    @abstractmethod
    def value(self, policy: np.ndarray) -> np.ndarray:
        """Penalty of each row of ``policy``."""

    @abstractmethod
    def choice(self, scores: np.ndarray) -> np.ndarray:
        """Row-wise ``argmax_p <y, p> - h(p)``."""

    @abstractmethod
    def support(self, scores: np.ndarray) -> np.ndarray:
        """Row-wise ``max_p <y, p> - h(p)``."""


class GibbsEntropy(Regularizer):
    """``h(p) = epsilon * sum_a p log p``; the choice map is a soft-max at temperature epsilon."""

    def __init__(self, epsilon: float):
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.epsilon = float(epsilon)

    def value(self, policy):
        p = np.asarray(policy, dtype=float)
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        return self.epsilon * plogp.sum(axis=-1)

    def choice(self, scores):
        return softmax_rows(scores, self.epsilon)

    def support(self, scores):
        return self.epsilon * logsumexp(np.asarray(scores, dtype=float) / self.epsilon, axis=-1)


def entropy(policy_row: np.ndarray, epsilon: float) -> float:
    """Negative Gibbs entropy of one action distribution (``0 log 0 = 0``)."""
    return float(GibbsEntropy(epsilon).value(policy_row))


def choice_map(y: Sequence[np.ndarray], epsilon: float) -> list[np.ndarray]:
    reg = GibbsEntropy(epsilon)
    return [reg.choice(yi) for yi in y]


def fenchel_coupling(profile, y, epsilon: float) -> float:
    """Fenchel coupling summed over states (and over players for list inputs).

    Zero exactly when ``profile == choice_map(y)``, positive otherwise.
    """
    if isinstance(profile, np.ndarray) and profile.ndim == 2:
        profile, y = [profile], [y]
    reg = GibbsEntropy(epsilon)
    total = 0.0
    for pi, yi in zip(profile, y):
        pi = np.asarray(pi, dtype=float)
        paired = np.sum(yi * pi, axis=-1) - reg.value(pi)
        total += float(np.sum(reg.support(yi) - paired))
    return total


# ---------------------------------------------------------------------------
# state and configuration


@dataclass(frozen=True)
class ScoreState:
    y: tuple[np.ndarray, ...]
    t: float = 0.0

    def __post_init__(self):
        ys = tuple(np.array(yi, dtype=float) for yi in self.y)
        for yi in ys:
            if not np.all(np.isfinite(yi)):
                raise FloatingPointError("score table contains non-finite entries")
            yi.flags.writeable = False
        object.__setattr__(self, "y", ys)


@dataclass(frozen=True)
class DynamicsConfig:
    eta: float = 1.0
    epsilon: float = 0.1
    step: float = 0.05
    max_time: float = 200.0
    max_iters: int = 10_000
    fp_tol: float = 1e-6
    alpha0: float = 1.0
    power: float = 1.0
    offset: float = 1.0
    auto_step: bool = True

    def __post_init__(self):
        for name in ("eta", "epsilon", "step", "max_time", "fp_tol", "alpha0", "offset"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.5 < self.power <= 1.0:
            raise ValueError(f"step-size exponent must lie in (0.5, 1], got {self.power}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def alpha(self, l: int) -> float:
        return self.alpha0 / (l + self.offset) ** self.power


def zero_scores(game: MarkovGame) -> Scores:
    return [np.zeros((game.state_count, k)) for k in game.action_counts]


def perturbed_scores(game: MarkovGame, seed: int, scale: float = 0.1) -> Scores:
    """Zero scores plus uniform noise in ``[-scale, scale]``."""
    rng = np.random.default_rng(seed)
    return [rng.uniform(-scale, scale, size=(game.state_count, k)) for k in game.action_counts]


def fixed_point_map(game: MarkovGame, y: Sequence[np.ndarray], epsilon: float) -> Scores:
    """``w(sigma(y))``."""
    return evaluate(game, choice_map(y, epsilon)).w


def score_residual(game: MarkovGame, y: Sequence[np.ndarray], epsilon: float) -> float:
    """``max |w(sigma(y)) - y|``."""
    return _residual(fixed_point_map(game, y, epsilon), y)


def _residual(w: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> float:
    return max(float(np.abs(wi - yi).max()) for wi, yi in zip(w, y))


def _axpy(a: float, x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> Scores:
    return [yi + a * xi for xi, yi in zip(x, y)]


# ---------------------------------------------------------------------------
# continuous time


def _drift(game, y, config, w=None):
    if w is None:
        w = fixed_point_map(game, y, config.epsilon)
    return [config.eta * (wi - yi) for wi, yi in zip(w, y)]


def _rk4(game, y, config, h, w0=None):
    k1 = _drift(game, y, config, w0)
    k2 = _drift(game, _axpy(h / 2, k1, y), config)
    k3 = _drift(game, _axpy(h / 2, k2, y), config)
    k4 = _drift(game, _axpy(h, k3, y), config)
    return [yi + h / 6 * (a + 2 * b + 2 * c + d) for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]


def ctld_step(game: MarkovGame, state: ScoreState, config: DynamicsConfig) -> ScoreState:
    """One classical RK4 step of size ``config.step``."""
    y = _rk4(game, list(state.y), config, config.step)
    return ScoreState(tuple(y), state.t + config.step)


def euler_step(game: MarkovGame, state: ScoreState, config: DynamicsConfig) -> ScoreState:
    y = _axpy(config.step, _drift(game, list(state.y), config), list(state.y))
    return ScoreState(tuple(y), state.t + config.step)


STEP_SAFETY = 0.6


def lipschitz_estimate(game: MarkovGame, y: Sequence[np.ndarray], epsilon: float,
                       iters: int = 8, seed: int = 0) -> float:
    """Finite-difference power-iteration estimate of ``||D(w o sigma)(y)||``."""
    rng = np.random.default_rng(seed)
    shapes = [yi.shape for yi in y]
    sizes = [yi.size for yi in y]
    flat_y = np.concatenate([np.ravel(yi) for yi in y])

    def split(v):
        parts = np.split(v, np.cumsum(sizes)[:-1])
        return [p.reshape(s) for p, s in zip(parts, shapes)]

    def G(v):
        return np.concatenate([np.ravel(x) for x in fixed_point_map(game, split(v), epsilon)])

    v = rng.standard_normal(flat_y.size)
    v /= np.linalg.norm(v)
    delta = 1e-6 * max(1.0, float(np.abs(flat_y).max(initial=0.0)))
    best = 0.0
    for _ in range(iters):
        jv = (G(flat_y + delta * v) - G(flat_y - delta * v)) / (2 * delta)
        norm = float(np.linalg.norm(jv))
        best = max(best, norm)
        if norm == 0.0:
            break
        v = jv / norm
    return best


def stable_step(game: MarkovGame, y0: Sequence[np.ndarray], config: DynamicsConfig) -> float:
    """Largest step not exceeding ``config.step`` that keeps RK4 inside its stability region.

    The linearised drift has eigenvalues ``eta * (lambda - 1)`` with ``|lambda|``
    bounded by the local gain of ``w o sigma``; the gain is probed at the uniform
    profile and at ``y0`` and the step is capped so ``h * eta * (1 + L) <= 2``,
    then shrunk by :data:`STEP_SAFETY`. Stability alone is not enough at small
    epsilon: the soft-max curvature grows like ``1/eps**2`` and a step at the
    linear limit can raise the Fenchel coupling during the transient.
    """
    if not config.auto_step:
        return config.step
    gain = max(lipschitz_estimate(game, zero_scores(game), config.epsilon),
               lipschitz_estimate(game, y0, config.epsilon))
    return min(config.step, STEP_SAFETY * 2.0 / (config.eta * (1.0 + gain)))


def _lyapunov(reference, y, epsilon):
    return None if reference is None else fenchel_coupling(reference, y, epsilon)


def run_ctld(game: MarkovGame, y0: Sequence[np.ndarray] | None, config: DynamicsConfig,
             reference: Sequence[np.ndarray] | None = None, trace_every: int = 1,
             nashconv_every: int = 0, record_wall_time: bool = False,
             trace: LearningTrace | None = None) -> tuple[ScoreState, LearningTrace]:
    """Integrate the score ODE until ``max|w(sigma(y)) - y| < fp_tol`` or ``max_time``.

    ``reference`` is a profile (normally the converged one) whose Fenchel
    coupling with the running scores is logged as the Lyapunov value.
    ``nashconv_every=0`` logs NashConv only for the first and last rows.
    """
    y = [np.array(yi, dtype=float) for yi in (y0 if y0 is not None else zero_scores(game))]
    h = stable_step(game, y, config)
    trace = trace or LearningTrace(record_wall_time=record_wall_time)
    trace.info.update(step=h, eta=config.eta, epsilon=config.epsilon)
    start = time.perf_counter()
    n_steps = 0
    t = 0.0

    def log(w, residual, force_nc=False):
        nc = None
        if force_nc or (nashconv_every and n_steps % nashconv_every == 0):
            nc = nash_conv(game, choice_map(y, config.epsilon)).total
        trace.add(t, residual, nc, _lyapunov(reference, y, config.epsilon),
                  (time.perf_counter() - start) * 1e3)

    max_steps = math.ceil(config.max_time / h - 1e-9)
    while True:
        w = fixed_point_map(game, y, config.epsilon)
        residual = _residual(w, y)
        done = residual < config.fp_tol or n_steps >= max_steps
        if done or n_steps % trace_every == 0:
            log(w, residual, force_nc=done or n_steps == 0)
        if done:
            trace.status = "converged" if residual < config.fp_tol else "max_time"
            break
        y = _rk4(game, y, config, h, w0=w)
        n_steps += 1
        t = n_steps * h
        if not all(np.all(np.isfinite(yi)) for yi in y):
            trace.status = "diverged"
            raise FloatingPointError(f"scores became non-finite at t={t}")
    trace.info.update(steps=n_steps, residual=residual)
    return ScoreState(tuple(y), t), trace


# ---------------------------------------------------------------------------
# discrete time


def dtld_update(y: Sequence[np.ndarray], w_hat: Sequence[np.ndarray], alpha: float,
                eta: float) -> Scores:
    return [yi + alpha * eta * (wi - yi) for yi, wi in zip(y, w_hat)]


def dtld_step_exact(game: MarkovGame, state: ScoreState, config: DynamicsConfig,
                    l: int) -> ScoreState:
    """Noise-free discrete step with ``w_hat = w(sigma(y_l))``."""
    if l < 0:
        raise ValueError("iteration index must be non-negative")
    w = fixed_point_map(game, state.y, config.epsilon)
    return ScoreState(tuple(dtld_update(state.y, w, config.alpha(l), config.eta)), l + 1)


def run_dtld(game: MarkovGame, y0: Sequence[np.ndarray] | None, config: DynamicsConfig,
             estimator: Estimator | None = None, reference=None, trace_every: int = 1,
             nashconv_every: int = 0, record_wall_time: bool = False,
             trace: LearningTrace | None = None, stop_on_residual: bool | None = None,
             on_iteration: Callable[[int, Scores], None] | None = None,
             ) -> tuple[ScoreState, LearningTrace]:
    """Iterate the discrete dynamics for ``config.max_iters`` steps.

    Without ``estimator`` the exact weighted advantage is used and the loop
    stops early once the score residual drops below ``fp_tol``. An estimator
    is called as ``estimator(l, profile)`` and returns noisy score targets.
    """
    y = [np.array(yi, dtype=float) for yi in (y0 if y0 is not None else zero_scores(game))]
    trace = trace or LearningTrace(record_wall_time=record_wall_time)
    if stop_on_residual is None:
        stop_on_residual = estimator is None
    start = time.perf_counter()
    residual = math.inf
    l = 0
    while True:
        profile = choice_map(y, config.epsilon)
        w = evaluate(game, profile).w
        residual = _residual(w, y)
        done = l >= config.max_iters or (stop_on_residual and residual < config.fp_tol)
        if done or l % trace_every == 0:
            nc = None
            if done or l == 0 or (nashconv_every and l % nashconv_every == 0):
                nc = nash_conv(game, profile).total
            trace.add(l, residual, nc, _lyapunov(reference, y, config.epsilon),
                      (time.perf_counter() - start) * 1e3)
        if done:
            break
        w_hat = w if estimator is None else estimator(l, profile)
        y = dtld_update(y, w_hat, config.alpha(l), config.eta)
        if not all(np.all(np.isfinite(yi)) for yi in y):
            trace.status = "diverged"
            raise FloatingPointError(f"scores became non-finite at iteration {l}")
        l += 1
        if on_iteration is not None:
            on_iteration(l, y)
    trace.status = "converged" if residual < config.fp_tol else "max_iters"
    trace.info.update(iterations=l, residual=residual)
    return ScoreState(tuple(y), l), trace


# ---------------------------------------------------------------------------
# fixed-point certificates


def stationarity_check(game: MarkovGame, profile: Sequence[np.ndarray], epsilon: float) -> float:
    """``max_i ||softmax(w^i(pi) / eps) - pi^i||_inf``; zero at fixed points of ``w o sigma``."""
    w = evaluate(game, profile).w
    return max(float(np.abs(softmax_rows(wi, epsilon) - np.asarray(pi)).max())
               for wi, pi in zip(w, profile))


def regularized_payoffs(game: MarkovGame, profile: Sequence[np.ndarray], epsilon: float) -> np.ndarray:
    """``u^i - sum_s h(pi^i(.|s))`` with the entropy summed unweighted over states."""
    reg = GibbsEntropy(epsilon)
    u = payoffs(game, profile)
    return np.array([u[i] - float(reg.value(pi).sum()) for i, pi in enumerate(profile)])


def regularized_payoff_probe(game: MarkovGame, profile: Sequence[np.ndarray], epsilon: float,
                             probes: int = 100, seed: int = 0) -> float:
    """Largest regularized-payoff gain found over random unilateral deviations.

    Non-positive (up to rounding) is evidence that ``profile`` is a Nash
    distribution; it is not a certificate.
    """
    rng = np.random.default_rng(seed)
    base = regularized_payoffs(game, profile, epsilon)
    worst = -math.inf
    for _ in range(probes):
        for i, k in enumerate(game.action_counts):
            dev = list(profile)
            dev[i] = rng.dirichlet(np.ones(k), size=game.state_count)
            gain = regularized_payoffs(game, dev, epsilon)[i] - base[i]
            worst = max(worst, gain)
    return worst


def map_bound(game: MarkovGame) -> float:
    """``2 R_max / (1 - gamma)^2``, a bound on ``||w(pi)||_inf`` for any profile."""
    return 2.0 * game.r_max / (1.0 - game.gamma) ** 2


def with_overrides(config: DynamicsConfig, **kw) -> DynamicsConfig:
    return replace(config, **kw)
