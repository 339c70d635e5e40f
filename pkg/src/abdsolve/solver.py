"""Tabular CFR, exact best responses, exploitability and gain."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .efg import Game, MissingInfosetError, Player, Strategy, TabularStrategy, as_tree, opponent
from .tree import Tree, slots_to_strategy, strategy_slots


@dataclass(frozen=True)
class CfrConfig:
    iterations: int = 1000
    variant: str = "plus"  # "plus", "vanilla" or "predictive"
    averaging: str = "linear"  # "linear", "uniform" or "quadratic"
    alternating_updates: bool = True
    # optional early stop once NashConv of the average profile is below this
    target_nash_conv: float | None = None
    check_every: int = 50

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.variant not in ("plus", "vanilla", "predictive"):
            raise ValueError(f"unknown CFR variant {self.variant!r}")
        if self.averaging not in ("linear", "uniform", "quadratic"):
            raise ValueError(f"unknown averaging {self.averaging!r}")
        if self.variant == "predictive" and not self.alternating_updates:
            raise ValueError("predictive CFR+ is implemented with alternating updates only")
        if self.averaging == "quadratic" and self.variant != "predictive":
            raise ValueError("quadratic averaging is only available for predictive CFR+")


@dataclass
class SolveReport:
    strategies: tuple[TabularStrategy, TabularStrategy]
    exploitability: tuple[float, float]
    value: float  # P1 utility of the average profile
    iterations: int
    seconds: float
    average: np.ndarray = field(repr=False)  # normalised average profile as a slot vector
    tree: Tree = field(repr=False)

    @property
    def nash_conv(self) -> float:
        return self.exploitability[0] + self.exploitability[1]


def average_profile(tree: Tree, strat_sum: np.ndarray) -> np.ndarray:
    if tree.num_infosets == 0:
        return strat_sum.copy()
    totals = np.add.reduceat(strat_sum, tree.inf_first)
    per_slot = np.repeat(totals, tree.inf_nact)
    uniform = np.repeat(1.0 / tree.inf_nact, tree.inf_nact)
    safe = np.where(per_slot > 0, per_slot, 1.0)
    return np.where(per_slot > 0, strat_sum / safe, uniform)


def br_value(tree: Tree, sig: np.ndarray, responder: Player) -> tuple[float, np.ndarray, int]:
    """Best-response value (responder's utility), pure slot vector and node visits."""
    return K.best_response(tree.roles, tree.parent, tree.slot, tree.infoset, tree.inf_player,
                           tree.inf_first, tree.inf_nact, tree.chance_prob, tree.utilities,
                           sig, int(responder))


def profile_value(tree: Tree, sig: np.ndarray) -> float:
    return float(K.expected_utility(tree.roles, tree.parent, tree.slot, tree.chance_prob, tree.utilities, sig))


def profile_exploitability(tree: Tree, sig: np.ndarray) -> tuple[float, float, float]:
    """(E1, E2, u) with E1 = BR2(s1) + u and E2 = BR1(s2) - u; E1 + E2 is NashConv."""
    u = profile_value(tree, sig)
    b2 = br_value(tree, sig, Player.P2)[0]
    b1 = br_value(tree, sig, Player.P1)[0]
    return b2 + u, b1 - u, u


def cfr_solve(game: Game, cfg: CfrConfig | None = None) -> SolveReport:
    cfg = cfg or CfrConfig()
    start = time.perf_counter()
    tree = as_tree(game)
    regrets = np.zeros(tree.num_slots)
    strat_sum = np.zeros(tree.num_slots)
    sigma = np.zeros(tree.num_slots)
    plus = cfg.variant == "plus"
    args = (tree.roles, tree.parent, tree.first_child, tree.num_children, tree.slot,
            tree.chance_prob, tree.utilities)
    power = {"uniform": 0.0, "linear": 1.0, "quadratic": 2.0}[cfg.averaging]
    linear = power == 1.0
    pred = np.zeros(tree.num_slots)
    chunk = cfg.check_every if cfg.target_nash_conv is not None else cfg.iterations
    done = 0
    while done < cfg.iterations:
        n = min(chunk, cfg.iterations - done)
        if cfg.variant == "predictive":
            K.pcfr_iterations(*args, sigma, regrets, strat_sum, pred, done, n, power,
                              tree.inf_first, tree.inf_nact, tree.inf_player)
        else:
            K.cfr_iterations(*args, sigma, regrets, strat_sum, done, n, plus, linear,
                             cfg.alternating_updates, tree.inf_first, tree.inf_nact, tree.inf_player)
        done += n
        if cfg.target_nash_conv is not None and done < cfg.iterations:
            e1, e2, _ = profile_exploitability(tree, average_profile(tree, strat_sum))
            if e1 + e2 <= cfg.target_nash_conv:
                break
    avg = average_profile(tree, strat_sum)
    e1, e2, u = profile_exploitability(tree, avg)
    s1 = slots_to_strategy(tree, avg, Player.P1, name="cfr_p1", normalize=False)
    s2 = slots_to_strategy(tree, avg, Player.P2, name="cfr_p2", normalize=False)
    return SolveReport((s1, s2), (e1, e2), u, done, time.perf_counter() - start, avg, tree)


def _check_coverage(tree: Tree, sig: np.ndarray, strategy: Strategy, responder: Player) -> None:
    """Raise if ``strategy`` lacks an infoset reachable when the responder plays everything."""
    full = sig.copy()
    for k in tree.infosets_of(responder):
        lo = tree.inf_first[k]
        full[lo:lo + tree.inf_nact[k]] = 1.0
    r = K.joint_reach(tree.roles, tree.parent, tree.slot, tree.chance_prob, full)
    for k in tree.infosets_of(strategy.player):
        if not strategy.covers(tree.inf_keys[k]):
            members = tree.decision_nodes[tree.infoset[tree.decision_nodes] == k]
            if np.any(r[members] > 0):
                raise MissingInfosetError(tree.inf_keys[k], strategy.player)


def best_response(game: Game, opp: Strategy, responder: Player | None = None) -> tuple[TabularStrategy, float]:
    """Pure best response (lowest-index ties) and its value for the responder."""
    responder = opponent(opp.player) if responder is None else Player(responder)
    tree = as_tree(game)
    sig = strategy_slots(tree, opp)
    _check_coverage(tree, sig, opp, responder)
    value, br, _ = br_value(tree, sig, responder)
    return slots_to_strategy(tree, br, responder, name="best_response", normalize=False), float(value)


_VALUE_CACHE: dict[tuple[str, float], float] = {}


def game_value(game: Game, tol: float = 1e-3, max_iterations: int = 200_000) -> float:
    """P1 value, cached per (game id, tolerance).

    CFR runs until NashConv <= tol; the returned value is the midpoint of the
    certified bracket [-BR2(s1), BR1(s2)], whose width is the NashConv.
    """
    key = (getattr(game, "game_id", "game"), tol)
    if key not in _VALUE_CACHE:
        rep = cfr_solve(game, CfrConfig(iterations=max_iterations, target_nash_conv=tol, check_every=25))
        tree = rep.tree
        lo = -br_value(tree, rep.average, Player.P2)[0]
        hi = br_value(tree, rep.average, Player.P1)[0]
        _VALUE_CACHE[key] = 0.5 * (lo + hi)
    return _VALUE_CACHE[key]


def clear_value_cache() -> None:
    _VALUE_CACHE.clear()


def exploitability(game: Game, s: Strategy, owner: Player | None = None, value: float | None = None) -> float:
    """Opponent's best-response utility above its game value."""
    owner = s.player if owner is None else Player(owner)
    v = game_value(game) if value is None else value
    _, b = best_response(game, s, opponent(owner))
    return b + v if owner == Player.P1 else b - v


def gain(game: Game, s: Strategy, opponent_model: Strategy, value: float | None = None) -> float:
    """P1 utility against the model above the game value."""
    from .efg import expected_utility

    v = game_value(game) if value is None else value
    return expected_utility(game, s, opponent_model) - v
