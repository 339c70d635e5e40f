"""Scripted opponents and hand-built portfolios.

All policies here are functions of (infoset key, legal labels), so a single
definition serves either seat.  Battleships shooters also carry a ``hint``
describing them to the vectorised rollout sampler; every shooter below
depends only on the set of cells already shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..efg import Game, GameError, Player, Portfolio, PolicyStrategy, Strategy, UniformStrategy
from ..rng import CounterRNG, stable_hash, stream_key
from .battleships import Battleships, parse_shot
from .leduc import LeducPoker, leduc_round

TOP_LEFT = "shoot:0,0"


@dataclass(frozen=True)
class OpponentId:
    """Scripted opponent identifier; ``arg`` is epsilon or seed when relevant."""

    kind: str
    arg: float | int | None = None

    @classmethod
    def parse(cls, text: str) -> "OpponentId":
        text = text.strip().lower()
        if text.startswith("noisy:"):
            return cls("noisy", float(text[6:]))
        if text.startswith("random:"):
            return cls("random", int(text[7:]))
        if text in ("uniform", "corner_avoider", "s1", "s2", "s3", "s4"):
            return cls(text)
        raise GameError(f"unknown opponent {text!r}")

    def __str__(self) -> str:
        if self.kind == "noisy":
            return f"noisy:{self.arg:g}"
        if self.kind == "random":
            return f"random:{self.arg}"
        return self.kind


# --- Battleships shooters -------------------------------------------------


def _is_placement(labels) -> bool:
    return labels[0].startswith("place:")


def _uniform_over(labels, allowed) -> list[float]:
    k = sum(allowed)
    return [1.0 / k if a else 0.0 for a in allowed]


def avoid_cell_policy(cell_label: str):
    """Shoot uniformly except at ``cell_label``, which is shot only when forced."""

    def fn(key, labels):
        if _is_placement(labels):
            return [1.0 / len(labels)] * len(labels)
        if len(labels) == 1:
            return [1.0]
        return _uniform_over(labels, [a != cell_label for a in labels])

    return fn


def noisy_corner_policy(eps: float):
    base = avoid_cell_policy(TOP_LEFT)

    def fn(key, labels):
        probs = base(key, labels)
        if _is_placement(labels) or eps == 0.0 or len(labels) == 1 or TOP_LEFT not in labels:
            return probs
        return [eps if a == TOP_LEFT else (1.0 - eps) * p for a, p in zip(labels, probs)]

    return fn


def parity_policy(parity: int):
    def fn(key, labels):
        if _is_placement(labels):
            return [1.0 / len(labels)] * len(labels)
        pref = [sum(parse_shot(a)) % 2 == parity for a in labels]
        if not any(pref):
            return [1.0 / len(labels)] * len(labels)
        return _uniform_over(labels, pref)

    return fn


def shooter(kind: str, arg=None, player: Player = Player.P2, width: int = 2) -> PolicyStrategy:
    """Battleships shooter with a sampler hint ``(kind, arg)``."""
    if kind == "uniform":
        return PolicyStrategy(player, lambda k, l: [1.0 / len(l)] * len(l), "uniform", hint=("uniform", 0.0))
    if kind == "avoid":
        label = f"shoot:{arg % width},{arg // width}"
        return PolicyStrategy(player, avoid_cell_policy(label), f"avoid{arg}", hint=("avoid", float(arg)))
    if kind == "noisy":
        name = "corner_avoider" if arg == 0.0 else f"noisy:{arg:g}"
        return PolicyStrategy(player, noisy_corner_policy(arg), name, hint=("noisy", float(arg)))
    if kind == "parity":
        return PolicyStrategy(player, parity_policy(arg), ("even" if arg == 0 else "odd") + "_first",
                              hint=("parity", float(arg)))
    raise GameError(f"unknown shooter {kind!r}")


# --- Leduc scripted players -----------------------------------------------


def _passive(labels, fold_ok=True) -> list[float]:
    if "check" in labels:
        return [1.0 if a == "check" else 0.0 for a in labels]
    return [1.0 if a == "fold" else 0.0 for a in labels]


def _aggressive(labels, fold_at_cap=False) -> list[float]:
    for a in ("bet", "raise"):
        if a in labels:
            return [1.0 if x == a else 0.0 for x in labels]
    target = "fold" if fold_at_cap else "call"
    return [1.0 if a == target else 0.0 for a in labels]


def tight_passive(key, labels):
    return _passive(labels)


def loose_aggressive(key, labels):
    return _aggressive(labels)


def leduc_scripted(name: str):
    """S1: passive then aggressive; S2: reversed; S3/S4 fold at the raise cap in the aggressive round."""
    aggressive_round = {"s1": 2, "s3": 2, "s2": 1, "s4": 1}[name]
    fold_at_cap = name in ("s3", "s4")

    def fn(key, labels):
        if leduc_round(key) == aggressive_round:
            return _aggressive(labels, fold_at_cap)
        return _passive(labels)

    return fn


# --- random strategies ----------------------------------------------------


def random_policy(seed: int):
    """Independent uniform-simplex draw per infoset, keyed by (seed, key)."""

    def fn(key, labels):
        rng = CounterRNG(stream_key(seed, stable_hash(key)))
        g = np.array([-math.log(1.0 - rng.random()) for _ in labels])
        return g / g.sum()

    return fn


# --- public constructors --------------------------------------------------


def scripted_opponent(game: Game, opp: OpponentId | str, player: Player = Player.P2) -> Strategy:
    opp = OpponentId.parse(opp) if isinstance(opp, str) else opp
    is_bs = isinstance(game, Battleships)
    is_leduc = isinstance(game, LeducPoker)
    if opp.kind == "uniform":
        if is_bs:
            return shooter("uniform", player=player)
        return UniformStrategy(player)
    if opp.kind == "random":
        return PolicyStrategy(player, random_policy(int(opp.arg)), str(opp))
    if opp.kind in ("corner_avoider", "noisy"):
        if not is_bs:
            raise GameError(f"opponent {opp} applies to Battleships only")
        return shooter("noisy", float(opp.arg or 0.0), player=player)
    if opp.kind in ("s1", "s2", "s3", "s4"):
        if not is_leduc:
            raise GameError(f"opponent {opp} applies to Leduc only")
        return PolicyStrategy(player, leduc_scripted(opp.kind), opp.kind.upper())
    raise GameError(f"unknown opponent {opp}")


PORTFOLIOS = ("avoid4", "parity3", "leduc2")


def builtin_portfolio(game: Game, name: str, owner: Player = Player.P1) -> Portfolio:
    if name == "avoid4":
        if not isinstance(game, Battleships) or game.cfg.cells != 4:
            raise GameError("avoid4 needs a 2x2 Battleships board")
        return Portfolio(owner, [(f"avoid{k}", shooter("avoid", k, owner, game.cfg.width)) for k in range(4)])
    if name == "parity3":
        if not isinstance(game, Battleships):
            raise GameError("parity3 needs a Battleships game")
        return Portfolio(owner, [
            ("uniform", shooter("uniform", player=owner)),
            ("even_first", shooter("parity", 0, owner)),
            ("odd_first", shooter("parity", 1, owner)),
        ])
    if name == "leduc2":
        if not isinstance(game, LeducPoker):
            raise GameError("leduc2 needs a Leduc game")
        return Portfolio(owner, [
            ("tight_passive", PolicyStrategy(owner, tight_passive, "tight_passive")),
            ("loose_aggressive", PolicyStrategy(owner, loose_aggressive, "loose_aggressive")),
        ])
    raise GameError(f"unknown portfolio {name!r}; available: {', '.join(PORTFOLIOS)}")
