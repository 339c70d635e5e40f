"""Experiment drivers; each returns a header and rows for one CSV file."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..agent import ABDAgent, AgentConfig, cdbr_baseline, composite_strategy, resolve_cfr
from ..depthlimit import ValueSource
from ..efg import Game, GameError, Player, Strategy, TabularStrategy, expected_utility
from ..games import Battleships, builtin_portfolio
from ..games.opponents import OpponentId
from ..rng import derive_seed
from ..robust import DEFAULT_P_GRID, pareto_sweep
from ..solver import CfrConfig, exploitability, game_value
from .config import ExperimentSpec, RunConfig, build_game, build_opponent
from .io import csv_text, emit_csv, format_strategy, parse_strategy, save_strategy

log = logging.getLogger(__name__)

SCHEMAS = {
    "table1": ["method", "depth", "value", "seconds"],
    "pareto": ["curve", "p", "gain", "exploitability", "seconds"],
    "table2": ["method", "opponent", "gain", "ci95", "seconds"],
    "table3": ["samples", "correct_fraction", "trials", "seconds"],
    "large_game": ["samples", "placement", "covers_top_left", "seconds"],
}


@dataclass
class ExperimentResult:
    name: str
    header: list[str]
    rows: list = field(default_factory=list)
    strategies: dict = field(default_factory=dict)  # file stem -> (strategy, game id)

    def csv(self) -> str:
        return csv_text(self.header, self.rows)


def _game_id(game: Game) -> str:
    return getattr(game, "game_id", type(game).__name__)


def reloaded(game: Game, s: TabularStrategy) -> TabularStrategy:
    """Round-trip through the strategy file format."""
    out, _ = parse_strategy(format_strategy(s, _game_id(game)))
    return out


def check_reload(game: Game, s: TabularStrategy, value: float, fn) -> None:
    """Recompute a metric from the serialised strategy and compare."""
    again = fn(reloaded(game, s))
    if abs(again - value) > 1e-6:
        raise GameError(f"metric changed after reload: {value!r} vs {again!r}")


# ---------------------------------------------------------------------------


def run_table1(cfg: RunConfig, seed: int = 0, depths=(1, 2, 3, 4)) -> ExperimentResult:
    """CDBR and ABD(p=1) values against the model for each depth."""
    game = build_game(cfg)
    opp = build_opponent(game, cfg.get("opponent", "corner_avoider"))
    name = cfg.get("portfolio", "avoid4")
    pf1 = builtin_portfolio(game, name, Player.P1)
    pf2 = builtin_portfolio(game, name, Player.P2)
    res = ExperimentResult("table1", SCHEMAS["table1"])
    for d in depths:
        start = time.perf_counter()
        s, v = cdbr_baseline(game, opp, d, resolve_cfr(cfg.get("iterations", 1000)))
        check_reload(game, s, v, lambda t: expected_utility(game, t, opp))
        res.rows.append(("CDBR", d, v, time.perf_counter() - start))
        res.strategies[f"cdbr_d{d}"] = (s, _game_id(game))
    for d in depths:
        start = time.perf_counter()
        acfg = AgentConfig(p=1.0, depth=d, p1_portfolio=pf1, p2_portfolio=pf2, fixed_opponent=opp,
                           values=ValueSource("exact"))
        agent = ABDAgent(game, acfg)
        s = composite_strategy(agent)
        v = expected_utility(agent.work, s, opp)
        check_reload(game, s, v, lambda t: expected_utility(game, t, opp))
        res.rows.append(("ABD", d, v, time.perf_counter() - start))
        res.strategies[f"abd_d{d}"] = (s, _game_id(game))
    return res


def abd_curve(game: Game, opp: Strategy, p_grid, d: int, pf1, pf2, vs: ValueSource, cfr: CfrConfig,
              beyond: str = "portfolio", curve: str = "abd") -> tuple[list, dict]:
    """(curve, p, gain, exploitability, seconds) rows of episode-composite strategies."""
    v = game_value(game)
    rows, strategies = [], {}
    templates: dict = {}
    work = None
    for p in sorted(p_grid):
        start = time.perf_counter()
        acfg = AgentConfig(p=p, depth=d, p1_portfolio=pf1, p2_portfolio=pf2, fixed_opponent=opp, values=vs,
                           cfr=cfr, fixed_beyond=beyond)
        agent = ABDAgent(game, acfg, work=work, templates=templates)
        work = agent.work
        s = composite_strategy(agent, fast=False)
        g = expected_utility(work, s, opp) - v
        e = exploitability(work, s, Player.P1, value=v)
        check_reload(game, s, e, lambda t: exploitability(work, t, Player.P1, value=v))
        rows.append((curve, p, g, e, time.perf_counter() - start))
        strategies[f"{curve}_p{p:g}"] = (s, _game_id(game))
    return rows, strategies


def run_pareto(cfg: RunConfig, seed: int = 0, kind: str = "battleships") -> ExperimentResult:
    """RNR, ABD and the rational-beyond-depth baseline over a p grid."""
    game = build_game(cfg)
    if kind == "leduc":
        opponents = [cfg.get("opponent")] if cfg.get("opponent") else ["uniform", "s1"]
        name = cfg.get("portfolio", "leduc2")
        vs = ValueSource(cfg.get("values", "sampled"), cfg.get("samples", 10), seed)
    else:
        opponents = [cfg.get("opponent", "corner_avoider")]
        name = cfg.get("portfolio", "avoid4")
        vs = ValueSource(cfg.get("values", "exact"), cfg.get("samples", 1), seed)
    p_grid = cfg.get("p_grid", DEFAULT_P_GRID)
    d = cfg.get("depth", 2)
    cfr = resolve_cfr(cfg.get("iterations", 1000))
    pf1 = builtin_portfolio(game, name, Player.P1)
    pf2 = builtin_portfolio(game, name, Player.P2)
    header = SCHEMAS["pareto"] if len(opponents) == 1 else ["opponent"] + SCHEMAS["pareto"]
    res = ExperimentResult(f"pareto_{kind}", header)
    for spec in opponents:
        opp = build_opponent(game, spec)
        prefix = () if len(opponents) == 1 else (spec,)
        for r in pareto_sweep(game, opp, p_grid, CfrConfig(iterations=cfg.get("rnr_iterations", 2000))):
            res.rows.append(prefix + ("rnr", r.p, r.gain, r.exploitability, r.seconds))
        for curve, beyond in (("abd", "portfolio"), ("cdrnr", "rational")):
            rows, strats = abd_curve(game, opp, p_grid, d, pf1, pf2, vs, cfr, beyond, curve)
            res.rows.extend(prefix + r for r in rows)
            res.strategies.update({f"{'_'.join(prefix + (k,))}": v for k, v in strats.items()})
    return res


# ---------------------------------------------------------------------------


def _episode_gain(game, work, agent_cfg, opp, templates, value) -> float:
    agent = ABDAgent(game, agent_cfg, work=work, templates=templates)
    s = composite_strategy(agent)
    return expected_utility(work, s, opp) - value


def run_table2(cfg: RunConfig, seed: int = 0) -> ExperimentResult:
    """Gains of CDBR and ABD(p=1) in Leduc against S1-S4 and random opponents."""
    game = build_game(cfg if cfg.get("game") else RunConfig({"game": "leduc"}))
    d = cfg.get("depth", 1)
    n_random = cfg.get("random_opponents", 500)
    samples = cfg.get("samples", 10)
    pf1 = builtin_portfolio(game, cfg.get("portfolio", "leduc2"), Player.P1)
    cfr = resolve_cfr(cfg.get("iterations", 1000))
    v = game_value(game)
    from ..agent import working_game

    work = working_game(game)
    methods = [
        ("CDBR", dict(fixed_beyond="rational")),
        ("ABD", dict(values="sampled")),
        ("ABD_exact", dict(values="exact")),
    ]
    res = ExperimentResult("table2", SCHEMAS["table2"])
    opponents = [(f"S{i}", [OpponentId(f"s{i}")]) for i in range(1, 5)]
    opponents.append(("Random", [OpponentId("random", derive_seed(seed, 2, j)) for j in range(n_random)]))
    for method, opts in methods:
        templates: dict = {}
        for label, ids in opponents:
            start = time.perf_counter()
            gains = []
            for j, oid in enumerate(ids):
                opp = build_opponent(game, str(oid))
                if method == "CDBR":
                    _, u = cdbr_baseline(game, opp, d, cfr, pf1, work=work, templates=templates)
                    gains.append(u - v)
                    continue
                vs = ValueSource(opts["values"], samples, derive_seed(seed, 3, j))
                acfg = AgentConfig(p=1.0, depth=d, p1_portfolio=pf1, p2_portfolio=pf1, fixed_opponent=opp,
                                   values=vs)
                gains.append(_episode_gain(game, work, acfg, opp, templates, v))
            arr = np.array(gains)
            ci = 1.96 * arr.std(ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else 0.0
            res.rows.append((method, label, float(arr.mean()), float(ci), time.perf_counter() - start))
    return res


# ---------------------------------------------------------------------------


def _covers_top_left(label: str) -> bool:
    # "place:x,y,WxH" covers (0, 0) exactly when it starts there
    x, y, _ = label[len("place:"):].split(",")
    return x == "0" and y == "0"


def _root_fast_agent(game, cfg: RunConfig, default_samples: int) -> tuple[ABDAgent, AgentConfig]:
    opp = build_opponent(game, cfg.get("opponent", "noisy:0.05"))
    name = cfg.get("portfolio", "parity3")
    pf1 = builtin_portfolio(game, name, Player.P1)
    acfg = AgentConfig(p=1.0, depth=cfg.get("depth", 2), p1_portfolio=pf1, p2_portfolio=pf1, fixed_opponent=opp,
                       values=ValueSource("sampled", default_samples, 0))
    return ABDAgent(game, acfg, work=game), acfg


def run_table3(cfg: RunConfig, seed: int = 0) -> ExperimentResult:
    """Fraction of trials whose resolved root placement covers the top-left cell."""
    if not cfg.get("game"):
        cfg = RunConfig({"game": "battleships", "width": 4, "height": 4, "ships": ((2, 1),), **cfg.values})
    game = build_game(cfg)
    if not isinstance(game, Battleships):
        raise GameError("table3 needs a Battleships game")
    levels = cfg.get("sample_levels", (1, 2, 3, 4, 5))
    trials = cfg.get("trials", 100)
    agent, acfg = _root_fast_agent(game, cfg, levels[0])
    root = game.root()
    key = game.infoset_key(root, Player.P1)
    labels = game.legal_actions(root)
    res = ExperimentResult("table3", SCHEMAS["table3"])
    for li, n in enumerate(levels):
        start = time.perf_counter()
        correct = 0
        for t in range(trials):
            agent.cfg = AgentConfig(**{**acfg.__dict__, "values": ValueSource("sampled", n, derive_seed(seed, li, t))})
            agent.evaluator = type(agent.evaluator)(game, agent.cfg.values)
            agent.reset()
            probs = agent.fast_infoset(key, game.public_key(root))
            correct += _covers_top_left(labels[int(np.argmax(probs))])
        res.rows.append((n, correct / trials, trials, time.perf_counter() - start))
    return res


def run_large_game(cfg: RunConfig, seed: int = 0) -> ExperimentResult:
    """One root decision on a board too large to materialise (sampled values, fast path)."""
    if not cfg.get("game"):
        cfg = RunConfig({"game": "battleships", "width": 5, "height": 5, "ships": ((2, 2), (2, 2)), **cfg.values})
    game = build_game(cfg)
    n = cfg.get("samples", 100)
    agent, acfg = _root_fast_agent(game, cfg, n)
    agent.cfg = AgentConfig(**{**acfg.__dict__, "values": ValueSource("sampled", n, derive_seed(seed, 0))})
    agent.evaluator = type(agent.evaluator)(game, agent.cfg.values)
    root = game.root()
    start = time.perf_counter()
    probs = agent.fast_infoset(game.infoset_key(root, Player.P1), game.public_key(root))
    label = game.legal_actions(root)[int(np.argmax(probs))]
    res = ExperimentResult("large_game", SCHEMAS["large_game"])
    res.rows.append((n, label, int(_covers_top_left(label)), time.perf_counter() - start))
    return res


RUNNERS = {
    "table1": run_table1,
    "pareto_battleships": lambda cfg, seed: run_pareto(cfg, seed, "battleships"),
    "pareto_leduc": lambda cfg, seed: run_pareto(
        cfg if cfg.get("game") else RunConfig({"game": "leduc", **cfg.values}), seed, "leduc"),
    "table2": run_table2,
    "table3": run_table3,
    "large_game": run_large_game,
}


def run_experiment(spec: ExperimentSpec, write_strategies: bool = True) -> ExperimentResult:
    res = RUNNERS[spec.id](spec.config, spec.seed)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    emit_csv(res.header, res.rows, spec.out_dir / f"{spec.id}.csv")
    if write_strategies:
        for stem, (s, gid) in sorted(res.strategies.items()):
            save_strategy(s, spec.out_dir / "strategies" / f"{stem}.txt", gid)
    return res
