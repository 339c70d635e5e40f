"""``abdsolve`` command line."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from ..efg import GameError, Player
from ..solver import CfrConfig, best_response, cfr_solve, game_value
from .config import EXPERIMENTS, ExperimentSpec, RunConfig, build_game, build_opponent, parse_config, parse_config_text
from .io import csv_text, emit_csv, save_strategy


def _load_config(text: str | None) -> RunConfig:
    """A config file path, or a bare game name such as ``leduc``."""
    if text is None:
        return RunConfig({})
    if Path(text).exists():
        return parse_config(text)
    return parse_config_text(f"game = {text}")


def _write(header, rows, out) -> None:
    if out:
        emit_csv(header, rows, out)
    else:
        sys.stdout.write(csv_text(header, rows))


def cmd_solve(a) -> None:
    cfg = _load_config(a.game)
    game = build_game(cfg)
    rep = cfr_solve(game, CfrConfig(iterations=a.iterations or cfg.get("iterations", 1000)))
    rows = [(getattr(game, "game_id", "game"), rep.iterations, rep.value, rep.exploitability[0],
             rep.exploitability[1], rep.seconds)]
    _write(["game", "iterations", "value", "exploitability_p1", "exploitability_p2", "seconds"], rows, a.out)
    if a.strategy_dir:
        gid = getattr(game, "game_id", "game")
        for i, s in enumerate(rep.strategies, start=1):
            save_strategy(s, Path(a.strategy_dir) / f"p{i}.txt", gid)


def cmd_br(a) -> None:
    cfg = _load_config(a.game)
    game = build_game(cfg)
    opp = build_opponent(game, a.opponent or cfg.get("opponent", "uniform"))
    start = time.perf_counter()
    s, value = best_response(game, opp, Player.P1)
    _write(["opponent", "value", "gain", "seconds"],
           [(a.opponent, value, value - game_value(game), time.perf_counter() - start)], a.out)
    if a.strategy_out:
        save_strategy(s, a.strategy_out, getattr(game, "game_id", "game"))


def cmd_rnr(a) -> None:
    from ..robust import DEFAULT_P_GRID, pareto_sweep

    cfg = _load_config(a.game)
    game = build_game(cfg)
    opp = build_opponent(game, a.opponent or cfg.get("opponent", "uniform"))
    grid = [float(x) for x in a.p.split(",")] if a.p else cfg.get("p_grid", DEFAULT_P_GRID)
    for p in grid:
        if not 0.0 <= p <= 1.0:
            raise GameError(f"p must lie in [0, 1], got {p:g}")
    rows = pareto_sweep(game, opp, grid, CfrConfig(iterations=a.iterations or 2000))
    _write(["p", "gain", "exploitability", "iterations", "seconds"],
           [(r.p, r.gain, r.exploitability, r.iterations, r.seconds) for r in rows], a.out)


def cmd_abd(a) -> None:
    from ..agent import ABDAgent, AgentConfig, play_match, resolve_cfr
    from ..depthlimit import ValueSource
    from ..games import builtin_portfolio

    cfg = _load_config(a.game)
    game = build_game(cfg)
    opp_spec = a.opponent or cfg.get("opponent", "uniform")
    opp = build_opponent(game, opp_spec)
    name = a.portfolio or cfg.get("portfolio") or ("leduc2" if cfg.get("game") == "leduc" else "avoid4")
    pf1 = builtin_portfolio(game, name, Player.P1)
    pf2 = builtin_portfolio(game, name, Player.P2)
    p = a.p if a.p is not None else cfg.get("p", 1.0)
    if not 0.0 <= p <= 1.0:
        raise GameError(f"p must lie in [0, 1], got {p:g}")
    vs = ValueSource(a.values or cfg.get("values", "exact"), a.samples or cfg.get("samples", 1), a.seed)
    acfg = AgentConfig(p=p, depth=a.depth or cfg.get("depth", 2), p1_portfolio=pf1, p2_portfolio=pf2,
                       fixed_opponent=opp, values=vs, cfr=resolve_cfr(a.iterations or cfg.get("iterations", 1000)))
    stats = play_match(lambda: ABDAgent(game, acfg), opp, a.episodes or cfg.get("episodes", 100), a.seed,
                       exact=a.exact_ev or cfg.get("exact_ev", False))
    _write(["opponent", "p", "depth", "portfolio", "values", "episodes", "mean", "ci95", "gain", "seconds"],
           [(opp_spec, p, acfg.depth, name, vs.provenance, stats.episodes, stats.mean, stats.ci95, stats.gain,
             stats.seconds)], a.out)


def cmd_exp(a) -> None:
    from .experiments import run_experiment

    cfg = _load_config(a.config)
    spec = ExperimentSpec(a.id, cfg, Path(a.out), a.seed)
    res = run_experiment(spec)
    sys.stdout.write(res.csv())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abdsolve", description="Opponent adaptation beyond the depth limit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="CFR equilibrium of a game")
    s.add_argument("--game")
    s.add_argument("--iterations", type=int)
    s.add_argument("--out")
    s.add_argument("--strategy-dir")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("br", help="best response of P1 to an opponent")
    s.add_argument("--game")
    s.add_argument("--opponent")
    s.add_argument("--out")
    s.add_argument("--strategy-out")
    s.set_defaults(fn=cmd_br)

    s = sub.add_parser("rnr", help="restricted Nash responses over a p grid")
    s.add_argument("--game")
    s.add_argument("--opponent")
    s.add_argument("--p", help="comma separated p values")
    s.add_argument("--iterations", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_rnr)

    s = sub.add_parser("abd", help="play the depth-limited adaptive agent against an opponent")
    s.add_argument("--game")
    s.add_argument("--opponent")
    s.add_argument("--p", type=float)
    s.add_argument("--depth", type=int)
    s.add_argument("--portfolio")
    s.add_argument("--values", choices=("exact", "sampled"))
    s.add_argument("--samples", type=int)
    s.add_argument("--iterations", type=int)
    s.add_argument("--episodes", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--exact-ev", action="store_true")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_abd)

    s = sub.add_parser("exp", help="run an experiment")
    s.add_argument("--id", required=True, choices=EXPERIMENTS)
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_exp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        args.fn(args)
    except GameError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
