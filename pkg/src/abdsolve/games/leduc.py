"""Leduc Hold'em.

Six cards (J, Q, K in two suits), one private card each, a public board card
between the two betting rounds.  Each round P1 acts first; bets are fixed
size and the number of bets plus raises per round is capped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..efg import GameError, ImplicitGame, Player

RANKS = "JQK"
SUITS = "sh"


@dataclass(frozen=True)
class LeducConfig:
    ranks: int = 3
    suits: int = 2
    ante: float = 1.0
    round1_bet: float = 2.0
    round2_bet: float = 4.0
    max_raises_per_round: int = 2

    def __post_init__(self):
        if (self.ranks, self.suits) != (3, 2):
            raise GameError("Leduc uses the standard 3-rank, 2-suit deck")


def card_name(c: int) -> str:
    return RANKS[c // 2] + SUITS[c % 2]


def leduc_round(key: bytes) -> int:
    """Betting round (1 or 2) of any Leduc observation key."""
    return 2 if b"board:" in key else 1


# payload: (cards, round_actions, contrib, raises, round)
#   cards: tuple of dealt cards (p1, p2, board)
#   round_actions: actions so far in the current betting round


class LeducPoker(ImplicitGame):
    game_id = "leduc"

    def __init__(self, cfg: LeducConfig | None = None):
        self.cfg = cfg or LeducConfig()

    def _initial(self):
        a = self.cfg.ante
        return ((), (), (a, a), 0, 1, None)

    def _role(self, data):
        cards, acts, contrib, raises, rnd, folder = data
        if folder is not None:
            return Player.TERMINAL
        if len(cards) < 2:
            return Player.CHANCE
        if _round_over(acts):
            if rnd == 1:
                return Player.CHANCE
            return Player.TERMINAL
        return Player(len(acts) % 2)

    def _actions(self, data):
        cards, acts, contrib, raises, rnd, folder = data
        role = self._role(data)
        if role == Player.CHANCE:
            return tuple("deal:" + card_name(c) for c in range(6) if c not in cards)
        facing = contrib[0] != contrib[1]
        if not facing:
            return ("check", "bet")
        if raises < self.cfg.max_raises_per_round:
            return ("fold", "call", "raise")
        return ("fold", "call")

    def _chance_probs(self, data):
        n = len(self._actions(data))
        return np.full(n, 1.0 / n)

    def _next(self, data, i):
        cards, acts, contrib, raises, rnd, folder = data
        label = self._actions(data)[i]
        if self._role(data) == Player.CHANCE:
            c = _parse_card(label[5:])
            name = label[5:]
            if len(cards) == 0:
                return (cards + (c,), acts, contrib, raises, rnd, None), (f"c:{name}", "-", "-")
            if len(cards) == 1:
                return (cards + (c,), acts, contrib, raises, rnd, None), ("-", f"c:{name}", "-")
            tok = f"board:{name}"
            return (cards + (c,), (), contrib, 0, 2, None), (tok, tok, tok)
        actor = len(acts) % 2
        bet = self.cfg.round1_bet if rnd == 1 else self.cfg.round2_bet
        contrib = list(contrib)
        if label == "fold":
            folder = actor
        elif label == "call":
            contrib[actor] = contrib[1 - actor]
        elif label in ("bet", "raise"):
            contrib[actor] = contrib[1 - actor] + bet
            raises += 1
        return (cards, acts + (label,), tuple(contrib), raises, rnd, folder), (label, label, label)

    def _utility(self, data):
        cards, acts, contrib, raises, rnd, folder = data
        if folder is not None:
            return -contrib[0] if folder == 0 else contrib[1]
        r1, r2, rb = cards[0] // 2, cards[1] // 2, cards[2] // 2
        s1 = 100 + r1 if r1 == rb else r1
        s2 = 100 + r2 if r2 == rb else r2
        if s1 == s2:
            return 0.0
        return contrib[1] if s1 > s2 else -contrib[0]


def _round_over(acts) -> bool:
    if len(acts) >= 2 and acts[-1] == "check" and acts[-2] == "check":
        return True
    return bool(acts) and acts[-1] == "call"


def _parse_card(name: str) -> int:
    return RANKS.index(name[0]) * 2 + SUITS.index(name[1])


def build_leduc(cfg: LeducConfig | None = None) -> LeducPoker:
    return LeducPoker(cfg)
