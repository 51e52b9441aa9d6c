"""Command-line front end.

Every run writes its CSV artifacts plus ``manifest.json`` into the output
directory; ``--config manifest.json`` replays a run exactly. Settings resolve
as flags > config file > defaults.

Exit codes: 0 success (including non-converged runs, see the status column),
2 usage, 3 I/O, 4 invalid game or profile.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import epsilon_sweep, mu_scan, write_sweep_csv
from .baselines import run_fp, run_ibr
from .dynamics import DynamicsConfig, choice_map, perturbed_scores, run_ctld, run_dtld, zero_scores
from .equilibrium import nash_conv, write_nashconv_csv
from .evaluation import evaluate
from .game import (GameParseError, GameValidationError, MarkovGame, ProfileFile, check_profile,
                   deterministic_profile, load_game, save_game, uniform_profile)
from .games import BUILTIN_GAMES, builtin_game, gen_random_game
from .parallel import default_workers
from .sampling import MODES, default_horizon, run_tabular_epo

OUT_ENV = "NASHDYN_OUT"

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVALID = 0, 2, 3, 4

DEFAULTS = {
    "game": None, "game_file": None, "random": None,
    "out": None, "seed": 0, "workers": None, "record_wall_time": False,
    "eta": 1.0, "epsilon": 0.1, "step": 0.05, "max_time": 200.0, "max_iters": 10_000,
    "fp_tol": 1e-6, "alpha0": 1.0, "power": 1.0, "offset": 1.0, "auto_step": True,
    "perturb": 0.0, "trace_every": 1, "nashconv_every": 0,
    "episodes": 64, "horizon": None, "lam": 0.95, "mode": "gae", "window": None,
    "baseline": "sample",
    "profile": "uniform", "alg": "ibr", "iters": 100,
    "samples": 1000, "bins": 30, "epsilons": "0.5,0.1,0.05", "output": None,
}


class UsageError(Exception):
    pass


class InvalidInput(Exception):
    pass


# ---------------------------------------------------------------------------
# parser


def _game_args(p):
    g = p.add_argument_group("game source (one of)")
    g.add_argument("--game", choices=sorted(BUILTIN_GAMES), help="built-in game")
    g.add_argument("--game-file", help="game JSON file")
    g.add_argument("--random", metavar="SPEC",
                   help="random game, e.g. seed=1,n=2,states=3,actions=2x2,low=-1,high=1")


def _common_args(p):
    p.add_argument("--config", help="JSON config or a previous run's manifest.json")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs/<command>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker threads (default: CPU count)")
    p.add_argument("--record-wall-time", action="store_true", default=argparse.SUPPRESS,
                   help="fill the wall_ms trace column (breaks byte-identical reruns)")


def _dynamics_args(p):
    d = p.add_argument_group("dynamics")
    d.add_argument("--eta", type=float)
    d.add_argument("--epsilon", type=float)
    d.add_argument("--step", type=float, help="RK4 step upper bound")
    d.add_argument("--no-auto-step", dest="auto_step", action="store_false", default=argparse.SUPPRESS,
                   help="use --step as is, without the stability cap")
    d.add_argument("--max-time", type=float)
    d.add_argument("--max-iters", type=int)
    d.add_argument("--fp-tol", type=float)
    d.add_argument("--alpha0", type=float)
    d.add_argument("--power", type=float)
    d.add_argument("--offset", type=float)
    d.add_argument("--perturb", type=float, help="uniform noise scale added to zero initial scores")
    d.add_argument("--trace-every", type=int)
    d.add_argument("--nashconv-every", type=int, help="0: first and last rows only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nashdyn", description="Score-based learning dynamics for tabular Markov games.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, game=True, dynamics=False):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        if game:
            _game_args(p)
        _common_args(p)
        if dynamics:
            _dynamics_args(p)
        return p

    p = add("eval", "exact evaluation of a profile")
    p.add_argument("--profile", help="profile JSON file, 'uniform' or 'pure:a1,a2,...'")
    add("ctld", "integrate the continuous-time dynamics", dynamics=True)
    add("dtld", "run the exact discrete-time dynamics", dynamics=True)
    p = add("epo-tab", "sample-based discrete dynamics with tabular scores", dynamics=True)
    p.add_argument("--episodes", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--window", type=int, help="iterations kept in the empirical value table")
    p.add_argument("--baseline", choices=("sample", "state"))
    p = add("baseline", "iterated best response or fictitious play")
    p.add_argument("--alg", choices=("ibr", "fp"))
    p.add_argument("--iters", type=int)
    p.add_argument("--profile")
    p = add("nashconv", "NashConv of a profile")
    p.add_argument("--profile")
    p = add("mu-scan", "sampled (hypo)monotonicity statistics")
    p.add_argument("--samples", type=int)
    p.add_argument("--bins", type=int)
    p = add("sweep", "one CTLD run per epsilon", dynamics=True)
    p.add_argument("--epsilons", help="comma separated, e.g. 0.5,0.05")
    p = add("gen", "write a game file")
    p.add_argument("--output", help="game file path (default <out>/game.json)")
    return parser


# ---------------------------------------------------------------------------
# config resolution


def resolve(command: str, ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    config_path = getattr(ns, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        doc = doc.get("config", doc)
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    cfg.update(given)
    if cfg["out"] is None:
        cfg["out"] = os.environ.get(OUT_ENV) or str(Path("runs") / command)
    return cfg


def _parse_random(spec: str) -> dict:
    out = {"seed": 0, "n": 2, "states": 3, "actions": None, "low": -1.0, "high": 1.0}
    try:
        for item in spec.split(","):
            key, value = item.split("=")
            key = key.strip()
            if key not in out:
                raise UsageError(f"unknown random-game key '{key}'")
            out[key] = value.strip()
        n = int(out["n"])
        actions = [int(a) for a in str(out["actions"]).split("x")] if out["actions"] else [2] * n
        return dict(seed=int(out["seed"]), n=n, state_count=int(out["states"]), action_counts=actions,
                    reward_range=(float(out["low"]), float(out["high"])))
    except ValueError as exc:
        raise UsageError(f"bad --random spec '{spec}': {exc}") from exc


def load_source(cfg: dict) -> MarkovGame:
    sources = [k for k in ("game", "game_file", "random") if cfg.get(k)]
    if len(sources) != 1:
        raise UsageError("give exactly one of --game, --game-file, --random")
    if cfg["game"]:
        return builtin_game(cfg["game"])
    if cfg["random"]:
        try:
            return gen_random_game(**_parse_random(cfg["random"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    path = Path(cfg["game_file"])
    if not path.exists():
        raise UsageError(f"game file not found: {path}")
    try:
        return load_game(path)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except (GameParseError, GameValidationError) as exc:
        raise InvalidInput(f"{path}: {exc}") from exc


def load_profile(game: MarkovGame, spec: str) -> list[np.ndarray]:
    if spec == "uniform":
        return uniform_profile(game)
    if spec.startswith("pure:"):
        try:
            actions = [int(a) for a in spec[5:].split(",")]
        except ValueError as exc:
            raise UsageError(f"bad pure profile '{spec}'") from exc
        if len(actions) != game.n_players:
            raise UsageError(f"pure profile needs {game.n_players} actions")
        spec_profile = deterministic_profile(game, actions)
    else:
        path = Path(spec)
        if not path.exists():
            raise UsageError(f"profile file not found: {path}")
        try:
            spec_profile = ProfileFile.load(path).policies
        except (json.JSONDecodeError, GameParseError) as exc:
            raise InvalidInput(f"{path}: {exc}") from exc
    try:
        return check_profile(game, spec_profile)
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc


def dynamics_config(cfg: dict) -> DynamicsConfig:
    try:
        return DynamicsConfig(
            eta=float(cfg["eta"]), epsilon=float(cfg["epsilon"]), step=float(cfg["step"]),
            max_time=float(cfg["max_time"]), max_iters=int(cfg["max_iters"]),
            fp_tol=float(cfg["fp_tol"]), alpha0=float(cfg["alpha0"]), power=float(cfg["power"]),
            offset=float(cfg["offset"]), auto_step=bool(cfg["auto_step"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def initial_scores(game: MarkovGame, cfg: dict):
    if cfg["perturb"]:
        return perturbed_scores(game, int(cfg["seed"]), float(cfg["perturb"]))
    return zero_scores(game)


def _workers(cfg) -> int:
    return int(cfg["workers"]) if cfg["workers"] else default_workers()


# ---------------------------------------------------------------------------
# commands


def _save_profile(path: Path, profile) -> None:
    ProfileFile([np.asarray(p) for p in profile]).save(path)


def cmd_eval(game, cfg, out: Path) -> dict:
    report = evaluate(game, load_profile(game, cfg["profile"]))
    report.to_csv(out / "eval.csv")
    return {"payoffs": report.u.tolist()}


def cmd_ctld(game, cfg, out: Path) -> dict:
    config = dynamics_config(cfg)
    state, trace = run_ctld(game, initial_scores(game, cfg), config,
                            trace_every=int(cfg["trace_every"]),
                            nashconv_every=int(cfg["nashconv_every"]),
                            record_wall_time=bool(cfg["record_wall_time"]))
    trace.to_csv(out / "trace.csv")
    _save_profile(out / "profile.json", choice_map(state.y, config.epsilon))
    return {"status": trace.status, **trace.info}


def cmd_dtld(game, cfg, out: Path) -> dict:
    config = dynamics_config(cfg)
    state, trace = run_dtld(game, initial_scores(game, cfg), config,
                            trace_every=int(cfg["trace_every"]),
                            nashconv_every=int(cfg["nashconv_every"]),
                            record_wall_time=bool(cfg["record_wall_time"]))
    trace.to_csv(out / "trace.csv")
    _save_profile(out / "profile.json", choice_map(state.y, config.epsilon))
    return {"status": trace.status, **trace.info}


def cmd_epo_tab(game, cfg, out: Path) -> dict:
    config = dynamics_config(cfg)
    horizon = int(cfg["horizon"]) if cfg["horizon"] else default_horizon(game.gamma)
    try:
        state, trace = run_tabular_epo(
            game, config, int(cfg["episodes"]), horizon, lam=float(cfg["lam"]), mode=cfg["mode"],
            seed=int(cfg["seed"]), y0=initial_scores(game, cfg),
            window=int(cfg["window"]) if cfg["window"] else None, baseline=cfg["baseline"],
            trace_every=int(cfg["trace_every"]), nashconv_every=int(cfg["nashconv_every"]),
            record_wall_time=bool(cfg["record_wall_time"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    trace.to_csv(out / "trace.csv")
    _save_profile(out / "profile.json", choice_map(state.y, config.epsilon))
    return {"status": trace.status, **trace.info}


def cmd_baseline(game, cfg, out: Path) -> dict:
    runner = run_ibr if cfg["alg"] == "ibr" else run_fp
    try:
        run = runner(game, load_profile(game, cfg["profile"]), int(cfg["iters"]), workers=_workers(cfg))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    run.trace.to_csv(out / "trace.csv")
    _save_profile(out / "profile.json", run.profiles[-1])
    return {"final_nashconv": run.nashconv()[-1]}


def cmd_nashconv(game, cfg, out: Path) -> dict:
    report = nash_conv(game, load_profile(game, cfg["profile"]), workers=_workers(cfg))
    write_nashconv_csv(out / "nashconv.csv", [(0, report)])
    return {"total": report.total}


def cmd_mu_scan(game, cfg, out: Path) -> dict:
    scan = mu_scan(game, int(cfg["samples"]), int(cfg["seed"]), workers=_workers(cfg))
    scan.histogram_csv(out / "mu_histogram.csv", bins=int(cfg["bins"]))
    with open(out / "mu_samples.csv", "w") as fh:
        fh.write("sample,inner_ratio,norm_ratio,cs_ratio\n")
        for k, (a, b, c) in enumerate(zip(scan.inner_ratio, scan.norm_ratio, scan.cs_ratio)):
            fh.write(f"{k},{a!r},{b!r},{c!r}\n")
    return {"max_inner": scan.max_inner, "max_norm": scan.max_norm,
            "ordering_violations": scan.ordering_violations()}


def cmd_sweep(game, cfg, out: Path) -> dict:
    try:
        eps = [float(x) for x in str(cfg["epsilons"]).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --epsilons: {exc}") from exc
    rows = epsilon_sweep(game, eps, dynamics_config(cfg), initial_scores(game, cfg))
    write_sweep_csv(out / "sweep.csv", rows)
    return {"rows": len(rows)}


def cmd_gen(game, cfg, out: Path) -> dict:
    target = Path(cfg["output"]) if cfg["output"] else out / "game.json"
    save_game(game, target)
    return {"path": str(target)}


COMMANDS = {
    "eval": cmd_eval, "ctld": cmd_ctld, "dtld": cmd_dtld, "epo-tab": cmd_epo_tab,
    "baseline": cmd_baseline, "nashconv": cmd_nashconv, "mu-scan": cmd_mu_scan,
    "sweep": cmd_sweep, "gen": cmd_gen,
}


def _err(msg: str) -> None:
    print(f"nashdyn: error: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    command = ns.command
    try:
        cfg = resolve(command, ns)
        game = load_source(cfg)
        out = Path(cfg["out"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc}") from exc
        summary = COMMANDS[command](game, cfg, out)
        manifest = {"command": command, "version": __version__, "config": cfg, "summary": summary}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except InvalidInput as exc:
        _err(str(exc))
        return EXIT_INVALID
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    print(json.dumps(summary, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
