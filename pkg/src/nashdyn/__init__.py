"""Nash distributions of tabular Markov games via score-based learning dynamics."""

__version__ = "0.1.0"

from .game import (MarkovGame, decode_joint, deterministic_profile, encode_joint, load_game,
                   save_game, uniform_profile, validate_game)
from .games import (build_biased_pennies, build_cournot, build_matching_pennies, build_matrix_game,
                    build_soccer, gen_random_game)
from .evaluation import EvalReport, evaluate, policy_update_identity_check, visitation
from .equilibrium import best_response, logit_response, nash_conv
from .dynamics import (DynamicsConfig, ScoreState, choice_map, fenchel_coupling, run_ctld, run_dtld,
                       stationarity_check)
from .sampling import estimate_w, run_tabular_epo

__all__ = [
    "MarkovGame", "decode_joint", "deterministic_profile", "encode_joint", "load_game", "save_game",
    "uniform_profile", "validate_game", "build_biased_pennies", "build_cournot",
    "build_matching_pennies", "build_matrix_game", "build_soccer", "gen_random_game", "EvalReport",
    "evaluate", "policy_update_identity_check", "visitation", "best_response", "logit_response",
    "nash_conv", "DynamicsConfig", "ScoreState", "choice_map", "fenchel_coupling", "run_ctld",
    "run_dtld", "stationarity_check", "estimate_w", "run_tabular_epo",
]
