"""Matrix-valued depth-limited games.

A look-ahead is expanded from a set of root histories until the opponent
(P2) has made ``d`` moves; chance nodes directly after the cut are still
expanded.  At every cut history both players pick a continuation strategy
from a portfolio (P1 first, P2 without observing P1's pick) and the game ends
with the expected payoff of the pair from that history.

Tree construction records *where* each strategy-dependent number goes
(opponent edges, trunk edges, leaf values, root weights), so one structure
can be re-bound to many opponents without rebuilding.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import _kernels as K
from .efg import (
    Game,
    GameError,
    Player,
    PolicyStrategy,
    Portfolio,
    Strategy,
    TabularStrategy,
    node_cap,
    NodeCapExceeded,
)
from .rng import CounterRNG, stable_hash, stream_key, stream_keys
from .tree import Tree, TreeBuilder, strategy_slots

log = logging.getLogger(__name__)

PF1 = b"pf1|"
PF2 = b"pf2|"
DEFAULT_PURE_CAP = 100_000

PortfolioLike = Union[Portfolio, Callable[[bytes], Portfolio]]


@dataclass(frozen=True)
class DepthSpec:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise GameError("depth limit d must be >= 1")


@dataclass(frozen=True)
class ValueSource:
    mode: str = "exact"  # "exact" or "sampled"
    n_samples: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise GameError(f"unknown value mode {self.mode!r}")
        if self.mode == "sampled" and self.n_samples < 1:
            raise GameError("n_samples must be >= 1 in sampled mode")

    @property
    def provenance(self) -> str:
        return "exact" if self.mode == "exact" else f"sampled(N={self.n_samples},seed={self.seed})"


@dataclass
class MatrixLeaf:
    history: object
    matrix: np.ndarray  # P1 utility, |P1| x |P2|
    provenance: str
    p1_names: list[str] = field(default_factory=list)
    p2_names: list[str] = field(default_factory=list)
    key: bytes = b""


def portfolio_for(pf: PortfolioLike, key: bytes) -> Portfolio:
    return pf(key) if callable(pf) else pf


# ---------------------------------------------------------------------------
# frontier


def cut_frontier(game: Game, roots: Sequence, spec: DepthSpec) -> list:
    """Histories where the look-ahead from ``roots`` is cut (depth-first order)."""
    out = []
    stack = [(h, 0) for h in reversed(list(roots))]
    while stack:
        h, n2 = stack.pop()
        role = game.role(h)
        if role == Player.TERMINAL:
            continue
        if n2 >= spec.d and role != Player.CHANCE:
            out.append(h)
            continue
        step = 1 if role == Player.P2 else 0
        for i in range(len(game.legal_actions(h)) - 1, -1, -1):
            stack.append((game.child(h, i), n2 + step))
    return out


# ---------------------------------------------------------------------------
# leaf values


def exact_value(game: Game, h, pi1: Strategy, pi2: Strategy, cap: int | None = None) -> float:
    """Expected P1 utility below ``h`` under (pi1, pi2) and chance, by recursion."""
    if isinstance(game, Tree):
        sig = strategy_slots(game, pi1) + strategy_slots(game, pi2)
        return float(_tree_values(game, sig)[h])
    cap = node_cap() if cap is None else cap
    total = 0.0
    count = 0
    stack = [(h, 1.0)]
    while stack:
        node, w = stack.pop()
        count += 1
        if count > cap:
            raise NodeCapExceeded(count, cap)
        role = game.role(node)
        if role == Player.TERMINAL:
            total += w * game.utility(node)
            continue
        if role == Player.CHANCE:
            probs = game.chance_probs(node)
        else:
            probs = (pi1 if role == Player.P1 else pi2).probs(game, node)
        for i, q in enumerate(probs):
            if q > 0.0:
                stack.append((game.child(node, i), w * q))
    return total


def _tree_values(tree: Tree, sig: np.ndarray) -> np.ndarray:
    return K.node_values(tree.roles, tree.first_child, tree.num_children, tree.slot,
                         tree.chance_prob, tree.utilities, sig)


def leaf_stream(seed: int, game: Game, h, index: int) -> int:
    """Stream key for the rollouts of one (history, portfolio entry)."""
    return stream_key(seed, stable_hash(tuple(game.history(h))), index)


def sampled_fixed_value(game: Game, h, pi1: Strategy, sigma2: Strategy, vs: ValueSource,
                        index: int = 0) -> float:
    """Mean P1 utility of ``vs.n_samples`` rollouts below ``h``.

    Randomness comes from the stream (seed, history, portfolio index), so the
    value does not depend on evaluation order.
    """
    rng = CounterRNG(leaf_stream(vs.seed, game, h, index))
    total = 0.0
    for _ in range(vs.n_samples):
        node = h
        while True:
            role = game.role(node)
            if role == Player.TERMINAL:
                total += game.utility(node)
                break
            if role == Player.CHANCE:
                probs = game.chance_probs(node)
            else:
                probs = (pi1 if role == Player.P1 else sigma2).probs(game, node)
            node = game.child(node, rng.choice(probs))
    return total / vs.n_samples


class LeafEvaluator:
    """Batch leaf values u(h, s1, s2) with the fastest applicable method.

    Trees use numba passes (exact) or rollouts (sampled); Battleships with
    hinted shooters uses the dedicated sampler; anything else falls back to
    Python recursion or rollouts.
    """

    def __init__(self, game: Game, vs: ValueSource):
        self.game = game
        self.vs = vs
        self._slots: dict[int, np.ndarray] = {}
        self._values: dict[tuple[int, int], np.ndarray] = {}
        self._pinned: list[Strategy] = []  # keeps id() keys valid

    def _slot_vec(self, s: Strategy) -> np.ndarray:
        v = self._slots.get(id(s))
        if v is None:
            v = strategy_slots(self.game, s)
            self._slots[id(s)] = v
            self._pinned.append(s)
        return v

    def values(self, hs: list, s1: Strategy, s2: Strategy, index: int, cache: dict | None = None) -> np.ndarray:
        """Leaf values; ``cache`` (per fixed list ``hs``) keeps derived arrays across calls."""
        if not hs:
            return np.zeros(0)
        cache = {} if cache is None else cache
        g = self.game
        if self.vs.mode == "exact":
            if isinstance(g, Tree):
                key = (id(s1), id(s2))
                vals = self._values.get(key)
                if vals is None:
                    vals = _tree_values(g, self._slot_vec(s1) + self._slot_vec(s2))
                    self._values[key] = vals
                return vals[np.asarray(hs, dtype=np.int64)]
            return np.array([exact_value(g, h, s1, s2) for h in hs])
        n = self.vs.n_samples
        if "hashes" not in cache:
            cache["hashes"] = np.array([stable_hash(tuple(g.history(h))) for h in hs], dtype=np.uint64)
        keys = stream_keys(self.vs.seed, cache["hashes"], index)
        if isinstance(g, Tree):
            sig = self._slot_vec(s1) + self._slot_vec(s2)
            return K.rollout_tree(g.roles, g.first_child, g.num_children, g.slot, g.chance_prob,
                                  g.utilities, sig, np.asarray(hs, dtype=np.int64), keys, n)
        fast = _battleships_batch(g, hs, s1, s2, keys, n, cache)
        if fast is not None:
            return fast
        return np.array([sampled_fixed_value(g, h, s1, s2, self.vs, index) for h in hs])


def _battleships_batch(game, hs, s1, s2, keys, n, cache):
    from .games.battleships import Battleships
    from .games._bs_kernels import KIND_CODES, rollout_values

    if not isinstance(game, Battleships):
        return None
    h1 = getattr(s1, "hint", None)
    h2 = getattr(s2, "hint", None)
    if h1 is None or h2 is None:
        return None
    arrays = cache.get("bs")
    if arrays is None:
        data = [h.data for h in hs]
        if any(d.placed != (game.num_ships, game.num_ships) or d.winner >= 0 for d in data):
            return None
        arrays = cache["bs"] = tuple(
            np.array(col, dtype=np.int64)
            for col in ([d.fleet[0] for d in data], [d.fleet[1] for d in data],
                        [d.shots[0] for d in data], [d.shots[1] for d in data], [d.turn for d in data]))
    f1, f2, sh1, sh2, turn = arrays
    return rollout_values(f1, f2, sh1, sh2, turn, game.cfg.cells, game.cfg.width,
                          KIND_CODES[h1[0]], float(h1[1]), KIND_CODES[h2[0]], float(h2[1]), keys, n)


# ---------------------------------------------------------------------------
# look-ahead construction with parameter bindings


@dataclass
class Bindings:
    """Strategy-dependent numbers of a built tree, by builder node id."""

    fixed_edges: list = field(default_factory=list)  # (node, p2 key, labels, action)
    trunk_edges: list = field(default_factory=list)  # (node, p1 key, labels, action)
    # (node, history, s1, s2 or None for the fixed opponent, i1, i2)
    leaves: list = field(default_factory=list)
    fixed_roots: list = field(default_factory=list)  # (node, history)
    fixed_dummy: int = -1
    branch_nodes: dict = field(default_factory=dict)  # "fixed"/"free" -> node
    s_keys: set = field(default_factory=set)  # P1 keys of the resolved public state
    groups: list | None = None  # leaves grouped by portfolio pair, built on first bind

    def remap(self, new_id: np.ndarray) -> "Bindings":
        m = lambda n: int(new_id[n])
        return Bindings(
            fixed_edges=[(m(n), k, l, a) for n, k, l, a in self.fixed_edges],
            trunk_edges=[(m(n), k, l, a) for n, k, l, a in self.trunk_edges],
            leaves=[(m(x[0]),) + tuple(x[1:]) for x in self.leaves],
            fixed_roots=[(m(n), h) for n, h in self.fixed_roots],
            fixed_dummy=m(self.fixed_dummy) if self.fixed_dummy >= 0 else -1,
            branch_nodes={k: m(v) for k, v in self.branch_nodes.items()},
            s_keys=set(self.s_keys),
        )


@dataclass
class Lookahead:
    """Parameters of one look-ahead expansion."""

    d: int
    p1: PortfolioLike
    p2: PortfolioLike | None
    fixed: bool  # P2 replaced by the fixed opponent (as chance nodes)
    tag: bytes = b""  # prefix of P2 keys
    beyond: str = "portfolio"  # "portfolio" or "rational" (fixed branch only)
    extra_p2: Strategy | None = None  # optional extra P2 column (free branch)
    prune: Strategy | None = None  # drop edges the fixed opponent never takes
    s_key: bytes | None = None


def _keys(game: Game, h):
    return (game.infoset_key(h, Player.P1), game.infoset_key(h, Player.P2), game.public_key(h))


def expand(b: TreeBuilder, bind: Bindings, game: Game, h, parent: int, prob: float, la: Lookahead,
           n2: int = 0) -> int:
    """Append the depth-limited expansion of ``h`` below ``parent``."""
    role = game.role(h)
    keys = _keys(game, h) if b.keep_keys else None
    if role == Player.TERMINAL:
        return b.add(parent, Player.TERMINAL, prob=prob, utility=game.utility(h), node_keys=keys, origin=h)
    if n2 >= la.d and role != Player.CHANCE:
        if la.beyond == "rational":
            cont = Lookahead(10 ** 9, la.p1, None, False, b"fixrat|")
            return expand(b, bind, game, h, parent, prob, cont, 0)
        return add_matrix_leaf(b, bind, game, h, parent, prob, la, keys)
    labels = game.legal_actions(h)
    k1 = game.infoset_key(h, Player.P1)
    if la.s_key is not None and role == Player.P1 and n2 == 0 and game.public_key(h) == la.s_key:
        bind.s_keys.add(k1)
    if role == Player.CHANCE:
        node = b.add(parent, Player.CHANCE, labels=labels, prob=prob, node_keys=keys, origin=h)
        for i, q in enumerate(game.chance_probs(h)):
            expand(b, bind, game, game.child(h, i), node, float(q), la, n2)
        return node
    if role == Player.P1:
        node = b.add(parent, Player.P1, key=k1, labels=labels, prob=prob, node_keys=keys, origin=h)
        for i in range(len(labels)):
            expand(b, bind, game, game.child(h, i), node, 1.0, la, n2)
        return node
    k2 = game.infoset_key(h, Player.P2)
    if la.fixed:
        node = b.add(parent, Player.CHANCE, labels=labels, prob=prob, node_keys=keys, origin=h)
        keep = la.prune.probs_at(k2, labels) if la.prune is not None else None
        for i in range(len(labels)):
            if keep is not None and keep[i] <= 0.0:
                continue
            c = expand(b, bind, game, game.child(h, i), node, 0.0, la, n2 + 1)
            bind.fixed_edges.append((c, k2, labels, i))
        return node
    node = b.add(parent, Player.P2, key=la.tag + k2, labels=labels, prob=prob, node_keys=keys, origin=h)
    for i in range(len(labels)):
        expand(b, bind, game, game.child(h, i), node, 1.0, la, n2 + 1)
    return node


def add_matrix_leaf(b: TreeBuilder, bind: Bindings, game: Game, h, parent: int, prob: float,
                    la: Lookahead, keys=None) -> int:
    k1 = game.infoset_key(h, Player.P1)
    pf1 = portfolio_for(la.p1, k1)
    node = b.add(parent, Player.P1, key=PF1 + k1, labels=pf1.names, prob=prob, node_keys=keys, origin=h)
    if la.fixed:
        for i1, s1 in enumerate(pf1.strategies):
            t = b.add(node, Player.TERMINAL, node_keys=keys, origin=h)
            bind.leaves.append((t, h, s1, None, i1, -1))
        return node
    k2 = game.infoset_key(h, Player.P2)
    pf2 = portfolio_for(la.p2, k2)
    cols = list(pf2.entries)
    if la.extra_p2 is not None:
        cols.append(("fixed_model", la.extra_p2))
    for i1, s1 in enumerate(pf1.strategies):
        n2 = b.add(node, Player.P2, key=la.tag + PF2 + k2, labels=[c[0] for c in cols], node_keys=keys, origin=h)
        for i2, (_, s2) in enumerate(cols):
            t = b.add(n2, Player.TERMINAL, node_keys=keys, origin=h)
            bind.leaves.append((t, h, s1, s2, i1, i2))
    return node


def bind_leaf_values(tree: Tree, bind: Bindings, game: Game, sigma2: Strategy | None,
                     evaluator: LeafEvaluator) -> None:
    """Write leaf utilities for the given fixed opponent into ``tree``."""
    if bind.groups is None:
        groups: dict[tuple, list] = {}
        for t, h, s1, s2, i1, i2 in bind.leaves:
            # rollout stream index: the P1 entry, or the (P1, P2) pair for free leaves
            index = i1 if i2 < 0 else i1 + (i2 + 1) * 65536
            g = groups.setdefault((id(s1), id(s2) if s2 is not None else None, index),
                                  [s1, s2, index, [], [], {}])
            g[3].append(t)
            g[4].append(h)
        bind.groups = [(s1, s2, index, np.asarray(nodes, dtype=np.int64), hs, cache)
                       for s1, s2, index, nodes, hs, cache in groups.values()]
    for s1, s2, index, nodes, hs, cache in bind.groups:
        tree.utilities[nodes] = evaluator.values(hs, s1, sigma2 if s2 is None else s2, index, cache)


def bind_fixed_edges(tree: Tree, bind: Bindings, sigma2: Strategy) -> None:
    cache: dict[bytes, np.ndarray] = {}
    nodes = np.empty(len(bind.fixed_edges), dtype=np.int64)
    probs = np.empty(len(bind.fixed_edges))
    for j, (n, key, labels, a) in enumerate(bind.fixed_edges):
        p = cache.get(key)
        if p is None:
            p = cache[key] = sigma2.probs_at(key, labels)
        nodes[j] = n
        probs[j] = p[a]
    tree.chance_prob[nodes] = probs


def collect_leaves(tree: Tree, bind: Bindings, game: Game, vs: ValueSource) -> list[MatrixLeaf]:
    """Group bound leaf values into per-history matrices."""
    by_node: dict[int, MatrixLeaf] = {}
    for t, h, s1, s2, i1, i2 in bind.leaves:
        pick = int(tree.parent[t]) if i2 < 0 else int(tree.parent[tree.parent[t]])
        leaf = by_node.get(pick)
        if leaf is None:
            p1_names = list(tree.inf_labels[tree.infoset[pick]])
            leaf = MatrixLeaf(h, np.zeros((len(p1_names), 1)), vs.provenance, p1_names, ["fixed"],
                              game.infoset_key(h, Player.P1))
            by_node[pick] = leaf
        if i2 >= 0:
            if leaf.p2_names == ["fixed"]:
                p2_names = list(tree.inf_labels[tree.infoset[tree.parent[t]]])
                leaf.p2_names = p2_names
                leaf.matrix = np.zeros((len(leaf.p1_names), len(p2_names)))
            leaf.matrix[i1, i2] = tree.utilities[t]
        else:
            leaf.matrix[i1, 0] = tree.utilities[t]
    return list(by_node.values())


def build_mvs_game(game: Game, roots: Sequence, spec: DepthSpec, P1: PortfolioLike, P2: PortfolioLike,
                   vs: ValueSource, weights: Sequence[float] | None = None) -> Tree:
    """Depth-limited game with matrix-valued leaves below a chance node over ``roots``."""
    roots = list(roots)
    weights = np.full(len(roots), 1.0 / len(roots)) if weights is None else np.asarray(weights, float)
    b = TreeBuilder(f"mvs({getattr(game, 'game_id', 'game')},d={spec.d})", keep_keys=False)
    bind = Bindings()
    la = Lookahead(spec.d, P1, P2, fixed=False)
    if len(roots) == 1 and weights[0] == 1.0:
        expand(b, bind, game, roots[0], -1, 1.0, la)
    else:
        top = b.add(-1, Player.CHANCE, labels=[f"root{i}" for i in range(len(roots))])
        for h, w in zip(roots, weights):
            expand(b, bind, game, h, top, float(w), la)
    tree = b.finalize(keep_origin=False)
    bind = bind.remap(b.new_id)
    bind_leaf_values(tree, bind, game, None, LeafEvaluator(game, vs))
    tree.bindings = bind
    tree.leaves = collect_leaves(tree, bind, game, vs)
    return tree


def dump_leaves(leaves: Sequence[MatrixLeaf], path) -> None:
    """CSV ``history_key,provenance,p1_name,p2_name,value``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["history_key", "provenance", "p1_name", "p2_name", "value"])
        for leaf in leaves:
            hkey = ".".join(str(a) for a in leaf.history) if isinstance(leaf.history, tuple) else leaf.key.hex()
            for i, a in enumerate(leaf.p1_names):
                for j, c in enumerate(leaf.p2_names):
                    w.writerow([hkey, leaf.provenance, a, c, f"{leaf.matrix[i, j]:.12g}"])


# ---------------------------------------------------------------------------
# pure continuations


def enumerate_pure_continuations(game: Game, frontier: Sequence, owner: Player = Player.P1,
                                 cap: int = DEFAULT_PURE_CAP) -> Portfolio:
    """All reduced pure strategies of ``owner`` below ``frontier``.

    Only infosets reachable under the strategy's own earlier choices are
    assigned, so behaviourally equivalent strategies appear once.
    """
    owner = Player(owner)

    def settle(nodes):
        out = []
        stack = list(nodes)
        while stack:
            h = stack.pop()
            role = game.role(h)
            if role == Player.TERMINAL:
                continue
            if role == owner:
                out.append(h)
            else:
                stack.extend(game.child(h, i) for i in range(len(game.legal_actions(h))))
        return out

    count = [0]

    def rec(nodes):
        nodes = settle(nodes)
        if not nodes:
            return [{}]
        groups: dict[bytes, list] = {}
        for h in nodes:
            groups.setdefault(game.infoset_key(h, owner), []).append(h)
        key = min(groups)
        members = groups.pop(key)
        rest = [h for hs in groups.values() for h in hs]
        labels = game.legal_actions(members[0])
        out = []
        for a in range(len(labels)):
            for tail in rec([game.child(h, a) for h in members] + rest):
                d = {key: (labels, a)}
                d.update(tail)
                out.append(d)
                if len(out) > cap:
                    raise GameError(f"pure continuation count exceeds cap {cap}")
        return out

    plans = rec(list(frontier))
    entries = []
    for j, plan in enumerate(plans):
        s = TabularStrategy(owner, name=f"pure{j}", partial=True)
        for key in sorted(plan):
            labels, a = plan[key]
            probs = np.zeros(len(labels))
            probs[a] = 1.0
            s.set(key, labels, probs)
        entries.append((f"pure{j}", s))
    return Portfolio(owner, entries)


def pure_portfolio_by_key(game: Game, frontier: Sequence, owner: Player, cap: int = DEFAULT_PURE_CAP):
    """Per-infoset pure continuation portfolios, keyed by the owner's key at the cut."""
    groups: dict[bytes, list] = {}
    for h in frontier:
        groups.setdefault(game.infoset_key(h, owner), []).append(h)
    table = {k: enumerate_pure_continuations(game, hs, owner, cap) for k, hs in groups.items()}

    def lookup(key: bytes) -> Portfolio:
        return table[key]

    lookup.table = table
    return lookup
