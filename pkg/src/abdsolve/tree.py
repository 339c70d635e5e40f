"""Explicit game trees in breadth-first layout.

Nodes are integers; a parent always precedes its children and the children
of a node are contiguous.  Every edge leaving a player node owns a *slot*
(infoset offset + action index) so a whole strategy profile is one flat
float array indexed by slot, which is what the numeric kernels consume.
"""

from __future__ import annotations

import numpy as np

from .efg import (
    Game,
    GameError,
    Player,
    Strategy,
    TabularStrategy,
    node_cap,
    NodeCapExceeded,
)

CHANCE = int(Player.CHANCE)
TERMINAL = int(Player.TERMINAL)


class Tree(Game):
    """Materialised game.  Implements ``Game`` with integer handles."""

    def __init__(self, *, game_id, role, parent, action_index, chance_prob, utility, infoset,
                 inf_player, inf_keys, inf_labels, chance_labels, node_keys=None, origin=None):
        self.game_id = game_id
        self.roles = np.asarray(role, dtype=np.int8)
        self.parent = np.asarray(parent, dtype=np.int32)
        self.action_index = np.asarray(action_index, dtype=np.int32)
        self.chance_prob = np.asarray(chance_prob, dtype=np.float64)
        self.utilities = np.asarray(utility, dtype=np.float64)
        self.infoset = np.asarray(infoset, dtype=np.int32)
        self.inf_player = np.asarray(inf_player, dtype=np.int8)
        self.inf_keys = list(inf_keys)
        self.inf_labels = list(inf_labels)
        self.chance_labels = chance_labels
        self.node_keys = node_keys
        self.origin = origin
        n = len(self.roles)
        self.num_nodes = n
        self.num_infosets = len(self.inf_keys)
        self.inf_nact = np.array([len(x) for x in self.inf_labels], dtype=np.int32)
        self.inf_first = np.zeros(self.num_infosets, dtype=np.int32)
        if self.num_infosets:
            self.inf_first[1:] = np.cumsum(self.inf_nact)[:-1]
        self.num_slots = int(self.inf_nact.sum())

        self.num_children = np.bincount(self.parent[1:], minlength=n).astype(np.int32)
        self.first_child = np.full(n, -1, dtype=np.int32)
        has = self.num_children > 0
        # children are contiguous and ordered, so the first child is the smallest id
        first = np.full(n, n, dtype=np.int64)
        np.minimum.at(first, self.parent[1:], np.arange(1, n))
        self.first_child[has] = first[has]
        self.depth = np.zeros(n, dtype=np.int32)
        if n > 1:
            # parents precede children, so this converges within max-depth sweeps
            while True:
                nd = self.depth.copy()
                nd[1:] = self.depth[self.parent[1:]] + 1
                if np.array_equal(nd, self.depth):
                    break
                self.depth = nd
        par_inf = np.full(n, -1, dtype=np.int32)
        par_inf[1:] = self.infoset[self.parent[1:]]
        firsts = self.inf_first if len(self.inf_first) else np.zeros(1, dtype=np.int32)
        self.slot = np.where(par_inf >= 0, firsts[np.maximum(par_inf, 0)] + self.action_index, -1).astype(np.int32)
        self.decision_nodes = np.nonzero(self.infoset >= 0)[0]
        self.terminals = np.nonzero(self.roles == TERMINAL)[0]
        self.key_index = {(int(p), k): i for i, (p, k) in enumerate(zip(self.inf_player, self.inf_keys))}

    # --- Game interface -------------------------------------------------

    def root(self) -> int:
        return 0

    def role(self, h: int) -> Player:
        return Player(int(self.roles[h]))

    def legal_actions(self, h: int) -> tuple[str, ...]:
        inf = self.infoset[h]
        if inf >= 0:
            return self.inf_labels[inf]
        if self.roles[h] == CHANCE:
            return self.chance_labels[h]
        return ()

    def child(self, h: int, i: int) -> int:
        if i < 0 or i >= self.num_children[h]:
            raise GameError(f"node {h} has no action {i}")
        return int(self.first_child[h] + i)

    def chance_probs(self, h: int) -> np.ndarray:
        lo = self.first_child[h]
        return self.chance_prob[lo:lo + self.num_children[h]].copy()

    def utility(self, h: int) -> float:
        return float(self.utilities[h])

    def infoset_key(self, h: int, player: Player) -> bytes:
        inf = self.infoset[h]
        if inf >= 0 and self.inf_player[inf] == player:
            return self.inf_keys[inf]
        if self.node_keys is None:
            raise GameError("tree was built without observation keys")
        return self.node_keys[h][int(player)]

    def public_key(self, h: int) -> bytes:
        if self.node_keys is None:
            raise GameError("tree was built without observation keys")
        return self.node_keys[h][2]

    def history(self, h: int) -> tuple[int, ...]:
        out = []
        while h > 0:
            out.append(int(self.action_index[h]))
            h = int(self.parent[h])
        return tuple(reversed(out))

    # --- helpers ----------------------------------------------------------

    def infosets_of(self, player: Player) -> np.ndarray:
        return np.nonzero(self.inf_player == int(player))[0]

    def infoset_members(self) -> list[np.ndarray]:
        order = np.argsort(self.infoset[self.decision_nodes], kind="stable")
        nodes = self.decision_nodes[order]
        counts = np.bincount(self.infoset[nodes], minlength=self.num_infosets)
        return np.split(nodes, np.cumsum(counts)[:-1])

    def children_range(self, h: int) -> range:
        lo = int(self.first_child[h])
        return range(lo, lo + int(self.num_children[h]))

    def kernel_args(self):
        return (self.roles, self.parent, self.first_child, self.num_children, self.slot,
                self.infoset, self.inf_player, self.inf_first, self.inf_nact,
                self.chance_prob, self.utilities)


class TreeBuilder:
    """Incremental construction of a ``Tree`` in any insertion order."""

    def __init__(self, game_id: str = "tree", keep_keys: bool = False, cap: int | None = None):
        self.game_id = game_id
        self.keep_keys = keep_keys
        self.cap = node_cap() if cap is None else cap
        self.parent: list[int] = []
        self.role: list[int] = []
        self.prob: list[float] = []
        self.util: list[float] = []
        self.infoset: list[int] = []
        self.children: list[list[int]] = []
        self.chance_labels: dict[int, tuple[str, ...]] = {}
        self.keys: list = []
        self.origin: list = []
        self._inf_index: dict[tuple[int, bytes], int] = {}
        self.inf_player: list[int] = []
        self.inf_keys: list[bytes] = []
        self.inf_labels: list[tuple[str, ...]] = []

    def __len__(self) -> int:
        return len(self.role)

    def add(self, parent: int, role: Player, *, key: bytes | None = None, labels=None,
            prob: float = 1.0, utility: float = 0.0, node_keys=None, origin=None) -> int:
        """Append a node; children are ordered by insertion under each parent."""
        n = len(self.role)
        if n >= self.cap:
            raise NodeCapExceeded(n + 1, self.cap)
        role = int(role)
        self.parent.append(parent)
        self.role.append(role)
        self.prob.append(prob)
        self.util.append(utility)
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(n)
        inf = -1
        if role in (0, 1):
            labels = tuple(labels)
            ident = (role, key)
            inf = self._inf_index.get(ident, -1)
            if inf < 0:
                inf = len(self.inf_keys)
                self._inf_index[ident] = inf
                self.inf_player.append(role)
                self.inf_keys.append(key)
                self.inf_labels.append(labels)
            elif self.inf_labels[inf] != labels:
                raise GameError(f"infoset {key!r} has inconsistent legal actions")
        elif role == CHANCE and labels is not None:
            self.chance_labels[n] = tuple(labels)
        self.infoset.append(inf)
        if self.keep_keys:
            self.keys.append(node_keys)
        self.origin.append(origin)
        return n

    def finalize(self, keep_origin: bool = True) -> Tree:
        n = len(self.role)
        order = [0]
        pos = 0
        while pos < len(order):
            order.extend(self.children[order[pos]])
            pos += 1
        if len(order) != n:
            raise GameError("builder contains nodes unreachable from the root")
        new_id = np.empty(n, dtype=np.int64)
        new_id[np.asarray(order)] = np.arange(n)
        old_parent = np.asarray(self.parent, dtype=np.int64)[order]
        parent = np.where(old_parent >= 0, new_id[np.maximum(old_parent, 0)], -1)
        action_index = np.zeros(n, dtype=np.int32)
        for kids in self.children:
            for i, c in enumerate(kids):
                action_index[new_id[c]] = i
        role = np.asarray(self.role, dtype=np.int8)[order]
        # canonical infoset order: by player, then key bytes
        inf_perm = sorted(range(len(self.inf_keys)), key=lambda i: (self.inf_player[i], self.inf_keys[i]))
        inf_new = np.empty(len(inf_perm), dtype=np.int32)
        inf_new[np.asarray(inf_perm, dtype=np.int64)] = np.arange(len(inf_perm), dtype=np.int32)
        old_inf = np.asarray(self.infoset, dtype=np.int64)[order]
        infoset = np.where(old_inf >= 0, inf_new[np.maximum(old_inf, 0)] if len(inf_new) else -1, -1)
        chance_labels = {int(new_id[k]): v for k, v in self.chance_labels.items()}
        self.new_id = new_id
        return Tree(
            game_id=self.game_id,
            role=role,
            parent=parent,
            action_index=action_index,
            chance_prob=np.asarray(self.prob)[order],
            utility=np.asarray(self.util)[order],
            infoset=infoset,
            inf_player=[self.inf_player[i] for i in inf_perm],
            inf_keys=[self.inf_keys[i] for i in inf_perm],
            inf_labels=[self.inf_labels[i] for i in inf_perm],
            chance_labels=chance_labels,
            node_keys=[self.keys[i] for i in order] if self.keep_keys else None,
            origin=[self.origin[i] for i in order] if keep_origin else None,
        )


def materialize(game: Game, cap: int | None = None, keep_keys: bool = True,
                keep_origin: bool = False) -> Tree:
    """Breadth-first enumeration of an implicit game under the node cap."""
    if isinstance(game, Tree):
        return game
    cap = node_cap() if cap is None else cap
    b = TreeBuilder(getattr(game, "game_id", "game"), keep_keys=keep_keys, cap=cap)
    frontier = [(game.root(), -1, 1.0)]
    while frontier:
        nxt = []
        for h, parent, prob in frontier:
            role = game.role(h)
            keys = None
            if keep_keys:
                keys = (game.infoset_key(h, Player.P1), game.infoset_key(h, Player.P2), game.public_key(h))
            if role == Player.TERMINAL:
                b.add(parent, role, prob=prob, utility=game.utility(h), node_keys=keys, origin=h)
                continue
            labels = game.legal_actions(h)
            key = game.infoset_key(h, role) if role != Player.CHANCE else None
            n = b.add(parent, role, key=key, labels=labels, prob=prob, node_keys=keys, origin=h)
            probs = game.chance_probs(h) if role == Player.CHANCE else None
            for i in range(len(labels)):
                nxt.append((game.child(h, i), n, float(probs[i]) if probs is not None else 1.0))
        frontier = nxt
    tree = b.finalize(keep_origin=keep_origin)
    tree.base_game = game
    return tree


def strategy_slots(tree: Tree, strategy: Strategy) -> np.ndarray:
    """Flat slot vector holding ``strategy`` on its player's infosets, zero elsewhere."""
    out = np.zeros(tree.num_slots)
    if isinstance(strategy, TabularStrategy) and strategy.partial:
        # only the listed infosets matter; others are filled uniformly
        for inf in tree.infosets_of(strategy.player):
            lo = tree.inf_first[inf]
            out[lo:lo + tree.inf_nact[inf]] = 1.0 / tree.inf_nact[inf]
        for key, (_, probs) in strategy.table.items():
            inf = tree.key_index.get((int(strategy.player), key))
            if inf is not None:
                lo = tree.inf_first[inf]
                out[lo:lo + tree.inf_nact[inf]] = probs
        return out
    for inf in tree.infosets_of(strategy.player):
        lo = tree.inf_first[inf]
        out[lo:lo + tree.inf_nact[inf]] = strategy.probs_at(tree.inf_keys[inf], tree.inf_labels[inf])
    return out


def slots_to_strategy(tree: Tree, vec: np.ndarray, player: Player, name: str = "tabular",
                      normalize: bool = True) -> TabularStrategy:
    """Tabular strategy from a slot vector (e.g. CFR strategy sums)."""
    out = TabularStrategy(player, name=name)
    for inf in tree.infosets_of(player):
        lo = tree.inf_first[inf]
        p = np.array(vec[lo:lo + tree.inf_nact[inf]], dtype=float)
        if normalize:
            s = p.sum()
            p = p / s if s > 0 else np.full(len(p), 1.0 / len(p))
        out.set(tree.inf_keys[inf], tree.inf_labels[inf], p)
    return out
