"""``key = value`` configuration files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..efg import Game, GameError, Player, Strategy
from ..games import BattleshipsConfig, LeducConfig, build_battleships, build_kuhn, build_leduc, scripted_opponent

EXPERIMENTS = ("table1", "pareto_battleships", "pareto_leduc", "table2", "table3", "large_game")


class ConfigError(GameError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _ships(text):
    out = []
    for part in text.split(","):
        w, x, h = part.strip().lower().partition("x")
        if not x:
            raise ValueError(f"ship {part!r} is not WxH")
        out.append((int(w), int(h)))
    return tuple(out)


def _shooter(text):
    t = text.strip().lower()
    if t not in ("p1", "p2"):
        raise ValueError("first_shooter must be p1 or p2")
    return t


def _prob(text):
    p = float(text)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p:g}")
    return p


def _positive(text):
    n = int(text)
    if n < 1:
        raise ValueError("must be >= 1")
    return n


def _choice(*allowed):
    def parse(text):
        t = text.strip().lower()
        if t not in allowed:
            raise ValueError(f"must be one of {', '.join(allowed)}")
        return t
    return parse


def _int_list(text):
    return tuple(_positive(x) for x in text.split(",") if x.strip())


def _float_list(text):
    return tuple(_prob(x) for x in text.split(",") if x.strip())


def _flag(text):
    t = text.strip().lower()
    if t not in ("true", "false", "1", "0", "yes", "no"):
        raise ValueError("expected true/false")
    return t in ("true", "1", "yes")


PARSERS = {
    "game": _choice("battleships", "leduc", "kuhn"),
    "width": _positive,
    "height": _positive,
    "ships": _ships,
    "first_shooter": _shooter,
    "opponent": str.strip,
    "p": _prob,
    "p_grid": _float_list,
    "depth": _positive,
    "portfolio": str.strip,
    "values": _choice("exact", "sampled"),
    "samples": _positive,
    "sample_levels": _int_list,
    "iterations": _positive,
    "rnr_iterations": _positive,
    "episodes": _positive,
    "trials": _positive,
    "random_opponents": _positive,
    "exact_ev": _flag,
}


@dataclass
class RunConfig:
    """Parsed configuration; ``values`` holds only keys present in the file."""

    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)


def parse_config_text(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key = key.strip()
        if not eq or not key or not val.strip():
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            values[key] = PARSERS[key](val.strip())
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", lineno) from None
    return RunConfig(values)


def parse_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def build_game(cfg: RunConfig) -> Game:
    kind = cfg.get("game", "battleships")
    if kind == "leduc":
        return build_leduc(LeducConfig())
    if kind == "kuhn":
        return build_kuhn()
    first = Player.P2 if cfg.get("first_shooter") == "p2" else Player.P1
    try:
        bcfg = BattleshipsConfig(cfg.get("width", 2), cfg.get("height", 2), list(cfg.get("ships", ((1, 1),))),
                                 first_shooter=first)
    except GameError as e:
        raise ConfigError(str(e)) from None
    return build_battleships(bcfg)


def build_opponent(game: Game, spec: str, player: Player = Player.P2) -> Strategy:
    """Scripted opponent id or ``file:<path>`` strategy file."""
    if spec.startswith("file:"):
        from .io import load_strategy

        s, _ = load_strategy(spec[5:])
        if s.player != player:
            raise ConfigError(f"strategy file {spec[5:]} is for player {int(s.player) + 1}")
        return s
    return scripted_opponent(game, spec, player)


@dataclass
class ExperimentSpec:
    id: str
    config: RunConfig
    out_dir: Path
    seed: int = 0

    def __post_init__(self):
        if self.id not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.id!r}; available: {', '.join(EXPERIMENTS)}")
        self.out_dir = Path(self.out_dir)
