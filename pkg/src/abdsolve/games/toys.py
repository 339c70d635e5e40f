"""Tiny hand-built games used by tests and examples."""

from __future__ import annotations

import numpy as np

from ..efg import ImplicitGame, Player


class TerminalGame(ImplicitGame):
    """Single terminal node."""

    game_id = "terminal"

    def __init__(self, value: float):
        self.value = value

    def _initial(self):
        return None

    def _role(self, data):
        return Player.TERMINAL

    def _utility(self, data):
        return self.value


class MatchingPennies(ImplicitGame):
    game_id = "matching_pennies"

    def _initial(self):
        return ()

    def _role(self, data):
        return Player.TERMINAL if len(data) == 2 else Player(len(data))

    def _actions(self, data):
        return ("heads", "tails")

    def _next(self, data, i):
        label = ("heads", "tails")[i]
        # P2 does not see P1's coin
        if not data:
            return data + (i,), (label, "-", "-")
        return data + (i,), ("-", label, "-")

    def _utility(self, data):
        return 1.0 if data[0] == data[1] else -1.0


# Three-line toy with a chance-selected pair of available lines.  Each line
# ends in a P2 decision {good, bad}; payoffs are (vs good, vs bad).
LINE_PAYOFFS = {
    "OPT": (0.0, 0.0),
    "ADPT": (0.0, 1.0),
    "RISK": (-1.0, 1.0),
}
SCENARIOS = (("A", ("OPT", "ADPT")), ("C", ("OPT", "RISK")), ("D", ("ADPT", "RISK")))


class LinesToy(ImplicitGame):
    """Safe optimum (OPT), free adaptation (ADPT) and risky adaptation (RISK).

    The scripted opponent always answers ``bad``; a rational one answers
    ``good``.  Against the p-mixture the lines are worth 0, p and 2p - 1.
    """

    game_id = "lines_toy"

    def _initial(self):
        return ()

    def _role(self, data):
        return (Player.CHANCE, Player.P1, Player.P2, Player.TERMINAL)[len(data)]

    def _actions(self, data):
        if not data:
            return tuple(f"scenario:{name}" for name, _ in SCENARIOS)
        if len(data) == 1:
            return SCENARIOS[data[0]][1]
        return ("good", "bad")

    def _chance_probs(self, data):
        return np.full(3, 1.0 / 3.0)

    def _next(self, data, i):
        label = self._actions(data)[i]
        if not data:
            return (i,), (label, "-", "-")
        return data + (i,), (label, label, label)

    def _utility(self, data):
        line = SCENARIOS[data[0]][1][data[1]]
        return LINE_PAYOFFS[line][data[2]]


def always_bad(key: bytes, labels) -> list[float]:
    return [1.0 if a == "bad" else 0.0 for a in labels]
