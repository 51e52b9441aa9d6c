"""Sampling estimates of (hypo)monotonicity and entropic-parameter sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import DynamicsConfig, choice_map, run_ctld, zero_scores
from .equilibrium import nash_conv
from .evaluation import evaluate
from .game import MarkovGame
from .parallel import parallel_map


@dataclass
class MuScanReport:
    """Per-sample statistics for random profile pairs.

    ``inner_ratio`` is <dw, dpi> / ||dpi||^2 and ``norm_ratio`` is
    ||dw|| / ||dpi||^2. ``cs_ratio`` = ||dw|| / ||dpi|| always dominates
    ``inner_ratio``.
    """

    inner_ratio: np.ndarray
    norm_ratio: np.ndarray
    cs_ratio: np.ndarray
    pi_distance: np.ndarray
    seed: int
    resampled: int = 0

    @property
    def sample_count(self) -> int:
        return len(self.inner_ratio)

    @property
    def max_inner(self) -> float:
        return float(self.inner_ratio.max())

    @property
    def max_norm(self) -> float:
        return float(self.norm_ratio.max())

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.inner_ratio.tolist(), self.norm_ratio.tolist()))

    def ordering_violations(self, slack: float = 1e-12) -> int:
        """Samples with ``inner_ratio > norm_ratio + slack``."""
        return int(np.sum(self.inner_ratio > self.norm_ratio + slack))

    def histogram_csv(self, path: str | Path, bins: int = 30) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["statistic", "bin_left", "bin_right", "count"])
            for name, data in (("inner_ratio", self.inner_ratio), ("norm_ratio", self.norm_ratio)):
                counts, edges = np.histogram(data, bins=bins)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    out.writerow([name, repr(float(lo)), repr(float(hi)), int(c)])
            out.writerow(["# summary", f"max_inner={self.max_inner!r}",
                          f"max_norm={self.max_norm!r}", f"samples={self.sample_count}"])


def random_profile(game: MarkovGame, rng: np.random.Generator) -> list[np.ndarray]:
    """Each state's action distribution drawn uniformly from the simplex."""
    return [rng.dirichlet(np.ones(k), size=game.state_count) for k in game.action_counts]


def _pair_stats(game, a, b):
    wa, wb = evaluate(game, a).w, evaluate(game, b).w
    dpi_sq = sum(float(np.sum((x - y) ** 2)) for x, y in zip(a, b))
    dw_sq = sum(float(np.sum((x - y) ** 2)) for x, y in zip(wa, wb))
    inner = sum(float(np.sum((x - y) * (p - q))) for x, y, p, q in zip(wa, wb, a, b))
    return inner, dw_sq, dpi_sq


def mu_scan(game: MarkovGame, sample_count: int, seed: int = 0, workers: int = 1,
            min_distance: float = 1e-12) -> MuScanReport:
    """Sample profile pairs and report both monotonicity statistics.

    Pairs are drawn sequentially from one seeded stream (so results do not
    depend on ``workers``); pairs closer than ``min_distance`` are redrawn.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = np.random.default_rng(seed)
    pairs = []
    resampled = 0
    while len(pairs) < sample_count:
        a, b = random_profile(game, rng), random_profile(game, rng)
        if sum(float(np.sum((x - y) ** 2)) for x, y in zip(a, b)) <= min_distance ** 2:
            resampled += 1
            continue
        pairs.append((a, b))
    stats = np.array(parallel_map(lambda ab: _pair_stats(game, *ab), pairs, workers))
    inner, dw_sq, dpi_sq = stats.T
    return MuScanReport(
        inner_ratio=inner / dpi_sq,
        norm_ratio=np.sqrt(dw_sq) / dpi_sq,
        cs_ratio=np.sqrt(dw_sq / dpi_sq),
        pi_distance=np.sqrt(dpi_sq),
        seed=seed,
        resampled=resampled,
    )


@dataclass
class BoundReport:
    scan: MuScanReport
    analytic_bound: float
    all_finite: bool
    within_bound: bool


def finite_mu_probe(game: MarkovGame, sample_count: int, seed: int = 0,
                       workers: int = 1) -> BoundReport:
    """Finite-mu illustration: every sampled ratio is finite and below an analytic constant.

    The constant is ``2 n R_max / (1 - gamma)^2 * 2 / min ||dpi||`` over the
    drawn pairs (``||w|| <= R_max/(1-gamma)^2`` entrywise-scaled, and
    ``|<dw, dpi>| / ||dpi||^2 <= ||dw|| / ||dpi||``).
    """
    scan = mu_scan(game, sample_count, seed, workers)
    finite = bool(np.all(np.isfinite(scan.inner_ratio)) and np.all(np.isfinite(scan.norm_ratio)))
    bound = (2.0 * game.n_players * game.r_max / (1.0 - game.gamma) ** 2
             * 2.0 / float(scan.pi_distance.min()))
    within = bool(np.all(np.abs(scan.inner_ratio) <= bound))
    return BoundReport(scan=scan, analytic_bound=bound, all_finite=finite, within_bound=within)


@dataclass
class SweepRow:
    epsilon: float
    nashconv: float
    residual: float
    status: str
    steps: int


def epsilon_sweep(game: MarkovGame, epsilons: Sequence[float], config: DynamicsConfig,
                  y0: Sequence[np.ndarray] | None = None) -> list[SweepRow]:
    """One CTLD run per epsilon from the same start; rows sorted by epsilon."""
    if any(not e > 0 for e in epsilons):
        raise ValueError("every epsilon must be positive")
    y0 = y0 if y0 is not None else zero_scores(game)
    rows = []
    for eps in sorted(epsilons):
        cfg = DynamicsConfig(**{**config.__dict__, "epsilon": float(eps)})
        state, trace = run_ctld(game, y0, cfg, trace_every=10 ** 9)
        nc = nash_conv(game, choice_map(state.y, eps)).total
        rows.append(SweepRow(float(eps), nc, trace.info["residual"], trace.status, trace.info["steps"]))
    return rows


def write_sweep_csv(path: str | Path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["epsilon", "nashconv", "residual_inf", "status", "steps"])
        for r in rows:
            out.writerow([repr(r.epsilon), repr(r.nashconv), repr(r.residual), r.status, r.steps])
