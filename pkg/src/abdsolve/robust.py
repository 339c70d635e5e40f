"""Robust adaptation games and restricted Nash responses."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .efg import Game, GameError, Player, Strategy, TabularStrategy, as_tree
from .solver import CfrConfig, SolveReport, _check_coverage, cfr_solve, exploitability, gain, game_value
from .tree import Tree, TreeBuilder, strategy_slots

FIXED_TAG = b"fix|"
FREE_TAG = b"free|"


@dataclass(frozen=True)
class RobustSpec:
    p: float
    fixed_opponent: Strategy

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise GameError(f"p must lie in [0, 1], got {self.p}")
        if self.fixed_opponent.player != Player.P2:
            raise GameError("the fixed opponent must be a P2 strategy")


@dataclass
class RnrResult:
    p: float
    response: TabularStrategy
    gain: float
    exploitability: float
    report: SolveReport
    free_opponent: TabularStrategy | None = None


def copy_subtree(b: TreeBuilder, base: Tree, src: int, parent: int, prob: float, *,
                 p2_tag: bytes, fixed: Strategy | None) -> int:
    """Append a copy of ``base`` below ``src`` to ``b``.

    P2 keys get ``p2_tag``; with ``fixed`` given, P2 decisions become chance
    nodes distributed as ``fixed``.
    """
    stack = [(src, parent, prob)]
    top = -1
    while stack:
        n, par, pr = stack.pop()
        role = int(base.roles[n])
        k1, k2, kp = base.node_keys[n]
        keys = (k1, p2_tag + k2, kp)
        if role == 3:
            new = b.add(par, Player.TERMINAL, prob=pr, utility=float(base.utilities[n]), node_keys=keys, origin=n)
        else:
            labels = base.legal_actions(n)
            kids = base.children_range(n)
            if role == 2:
                probs = base.chance_prob[kids.start:kids.stop]
                new = b.add(par, Player.CHANCE, labels=labels, prob=pr, node_keys=keys, origin=n)
            elif role == 1 and fixed is not None:
                probs = fixed.probs_at(k2, labels)
                new = b.add(par, Player.CHANCE, labels=labels, prob=pr, node_keys=keys, origin=n)
            else:
                probs = np.ones(len(kids))
                key = k1 if role == 0 else keys[1]
                new = b.add(par, Player(role), key=key, labels=labels, prob=pr, node_keys=keys, origin=n)
            for c, q in zip(reversed(kids), reversed(list(probs))):
                stack.append((c, new, float(q)))
        if top < 0:
            top = new
    return top


def build_rbadapt(game: Game, spec: RobustSpec) -> Tree:
    base = as_tree(game)
    if spec.p > 0.0:
        _check_coverage(base, strategy_slots(base, spec.fixed_opponent), spec.fixed_opponent, Player.P1)
    b = TreeBuilder(f"rbadapt({base.game_id},p={spec.p:g})", keep_keys=True)
    labels, probs, tags = [], [], []
    if spec.p > 0.0:
        labels.append("fixed"), probs.append(spec.p), tags.append(FIXED_TAG)
    if spec.p < 1.0:
        labels.append("free"), probs.append(1.0 - spec.p), tags.append(FREE_TAG)
    root = b.add(-1, Player.CHANCE, labels=labels, node_keys=(b"", b"", b""))
    for tag, q in zip(tags, probs):
        copy_subtree(b, base, 0, root, q, p2_tag=tag, fixed=spec.fixed_opponent if tag == FIXED_TAG else None)
    tree = b.finalize()
    tree.base_game = game
    return tree


def strip_tag(strategy: TabularStrategy, tag: bytes, name: str) -> TabularStrategy:
    out = TabularStrategy(strategy.player, name=name)
    for key, (labels, probs) in strategy.table.items():
        if key.startswith(tag):
            out.set(key[len(tag):], labels, probs)
    return out


def restricted_nash_response(game: Game, spec: RobustSpec, cfg: CfrConfig | None = None) -> RnrResult:
    rb = build_rbadapt(game, spec)
    rep = cfr_solve(rb, cfg or CfrConfig(iterations=2000))
    s1 = rep.strategies[0].copy(name=f"rnr(p={spec.p:g})")
    v = game_value(game)
    return RnrResult(
        p=spec.p,
        response=s1,
        gain=gain(game, s1, spec.fixed_opponent, value=v),
        exploitability=exploitability(game, s1, Player.P1, value=v),
        report=rep,
        free_opponent=strip_tag(rep.strategies[1], FREE_TAG, "free_p2") if spec.p < 1.0 else None,
    )


DEFAULT_P_GRID = tuple(round(0.1 * i, 10) for i in range(11))


@dataclass
class SweepRow:
    p: float
    gain: float
    exploitability: float
    iterations: int
    seconds: float


def pareto_sweep(game: Game, fixed_opponent: Strategy, p_list=DEFAULT_P_GRID,
                 cfg: CfrConfig | None = None) -> list[SweepRow]:
    rows = []
    for p in sorted(p_list):
        start = time.perf_counter()
        r = restricted_nash_response(game, RobustSpec(p, fixed_opponent), cfg)
        rows.append(SweepRow(p, r.gain, r.exploitability, r.report.iterations, time.perf_counter() - start))
    return rows
