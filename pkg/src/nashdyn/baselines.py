"""Iterated best response and fictitious play, both on the exact policy-iteration oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .equilibrium import best_response, nash_conv
from .game import MarkovGame, check_profile
from .parallel import parallel_map
from .trace import LearningTrace


@dataclass
class BaselineRun:
    algorithm: str
    profiles: list[list[np.ndarray]] = field(default_factory=list)
    trace: LearningTrace = field(default_factory=LearningTrace)

    def nashconv(self) -> list[float]:
        return self.trace.values("nashconv_total")


def _best_responses(game, profile, workers):
    return parallel_map(lambda i: best_response(game, profile, i).policy,
                        range(game.n_players), workers)


def _record(run: BaselineRun, game, l, profile):
    run.profiles.append([p.copy() for p in profile])
    run.trace.add(l, None, nash_conv(game, profile).total)


def run_ibr(game: MarkovGame, profile0: Sequence[np.ndarray], iters: int,
            workers: int = 1) -> BaselineRun:
    """Every player simultaneously switches to a best response to the others' last policies."""
    if iters < 1:
        raise ValueError("iters must be at least 1")
    profile = check_profile(game, profile0)
    run = BaselineRun("ibr", trace=LearningTrace(constants={"algorithm": "ibr"}))
    _record(run, game, 0, profile)
    for l in range(1, iters + 1):
        profile = _best_responses(game, profile, workers)
        _record(run, game, l, profile)
    run.trace.status = "done"
    return run


def run_fp(game: MarkovGame, profile0: Sequence[np.ndarray], iters: int,
           workers: int = 1) -> BaselineRun:
    """Per-state behavioural averaging of best responses with weight ``1/(l+1)``."""
    if iters < 1:
        raise ValueError("iters must be at least 1")
    avg = check_profile(game, profile0)
    run = BaselineRun("fp", trace=LearningTrace(constants={"algorithm": "fp"}))
    _record(run, game, 0, avg)
    for l in range(iters):
        br = _best_responses(game, avg, workers)
        weight = 1.0 / (l + 1)
        avg = [(1.0 - weight) * p + weight * b for p, b in zip(avg, br)]
        _record(run, game, l + 1, avg)
    run.trace.status = "done"
    return run
