"""Three-card Kuhn poker (ante 1, bet 1)."""

from __future__ import annotations

import numpy as np

from ..efg import ImplicitGame, Player

CARDS = "JQK"


class KuhnPoker(ImplicitGame):
    game_id = "kuhn"

    def _initial(self):
        return ((), ())  # cards dealt, betting actions

    def _role(self, data):
        cards, acts = data
        if len(cards) < 2:
            return Player.CHANCE
        if _finished(acts):
            return Player.TERMINAL
        return Player(len(acts) % 2)

    def _actions(self, data):
        cards, acts = data
        if len(cards) == 0:
            return tuple(f"deal:{c}" for c in CARDS)
        if len(cards) == 1:
            return tuple(f"deal:{c}" for c in CARDS if CARDS.index(c) != cards[0])
        return ("call", "fold") if "bet" in acts else ("check", "bet")

    def _chance_probs(self, data):
        n = len(self._actions(data))
        return np.full(n, 1.0 / n)

    def _next(self, data, i):
        cards, acts = data
        label = self._actions(data)[i]
        if len(cards) < 2:
            c = CARDS.index(label[-1])
            tok = f"c:{label[-1]}"
            toks = (tok, "-", "-") if not cards else ("-", tok, "-")
            return (cards + (c,), acts), toks
        return (cards, acts + (label,)), (label, label, label)

    def _utility(self, data):
        cards, acts = data
        if acts[-1] == "fold":
            # the player who folded is the last to act
            folder = (len(acts) - 1) % 2
            return 1.0 if folder == 1 else -1.0
        stake = 2.0 if "bet" in acts else 1.0
        return stake if cards[0] > cards[1] else -stake


def _finished(acts) -> bool:
    if not acts:
        return False
    if acts[-1] in ("fold", "call"):
        return True
    return acts == ("check", "check")


def build_kuhn() -> KuhnPoker:
    return KuhnPoker()
