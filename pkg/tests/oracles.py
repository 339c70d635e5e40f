"""Slow reference implementations used as independent oracles."""

import itertools

import numpy as np

from abdsolve.efg import Player


def brute_eu(game, s1, s2, h=None):
    """Plain recursion over the game, independent of the tree kernels."""
    h = game.root() if h is None else h
    role = game.role(h)
    if role == Player.TERMINAL:
        return game.utility(h)
    if role == Player.CHANCE:
        probs = game.chance_probs(h)
    else:
        probs = (s1 if role == Player.P1 else s2).probs(game, h)
    return sum(p * brute_eu(game, s1, s2, game.child(h, i)) for i, p in enumerate(probs) if p > 0)


def infosets(game, player):
    found = {}
    stack = [game.root()]
    while stack:
        h = stack.pop()
        role = game.role(h)
        if role == Player.TERMINAL:
            continue
        if role == player:
            found.setdefault(game.infoset_key(h, player), game.legal_actions(h))
        stack.extend(game.children(h))
    return found


class Pure:
    def __init__(self, player, choice):
        self.player = player
        self.choice = choice

    def probs(self, game, h):
        labels = game.legal_actions(h)
        out = np.zeros(len(labels))
        out[self.choice[game.infoset_key(h, self.player)]] = 1.0
        return out


def pure_strategies(game, player):
    sets = infosets(game, player)
    keys = sorted(sets)
    for combo in itertools.product(*[range(len(sets[k])) for k in keys]):
        yield Pure(player, dict(zip(keys, combo)))


def enumerate_best_value(game, opp, responder):
    """Best responder utility by trying every pure strategy."""
    sign = 1.0 if responder == Player.P1 else -1.0
    best = -np.inf
    for s in pure_strategies(game, responder):
        u = brute_eu(game, s, opp) if responder == Player.P1 else brute_eu(game, opp, s)
        best = max(best, sign * u)
    return best
