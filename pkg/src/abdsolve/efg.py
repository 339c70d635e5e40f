"""Extensive-form game abstraction, behavioural strategies and evaluation.

Games are implicit trees: a handle identifies a history and the game answers
per-history queries (role, legal actions, children, chance distribution,
utility, information-set and public-state keys).  ``abdsolve.tree.Tree`` is
the materialised counterpart and implements the same interface with integer
handles; all numeric work runs on trees.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

SEP = b"/"
DEFAULT_NODE_CAP = 5_000_000
PROB_TOL = 1e-9


class Player(IntEnum):
    P1 = 0
    P2 = 1
    CHANCE = 2
    TERMINAL = 3


def opponent(player: Player) -> Player:
    return Player.P2 if player == Player.P1 else Player.P1


def node_cap() -> int:
    """Materialisation cap; ``ABDSOLVE_NODE_CAP`` overrides the default."""
    value = os.environ.get("ABDSOLVE_NODE_CAP")
    return int(value) if value else DEFAULT_NODE_CAP


class GameError(Exception):
    pass


class MissingInfosetError(GameError):
    def __init__(self, key: bytes, player: Player):
        super().__init__(f"strategy for {player.name} has no entry for infoset {key!r}")
        self.key = key
        self.player = player


class NodeCapExceeded(GameError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"node cap exceeded: reached {count} nodes (cap {cap})")
        self.count = count
        self.cap = cap


class Game:
    """Interface shared by implicit games and materialised trees."""

    game_id: str = "game"

    def root(self) -> Hashable:
        raise NotImplementedError

    def role(self, h) -> Player:
        raise NotImplementedError

    def legal_actions(self, h) -> tuple[str, ...]:
        raise NotImplementedError

    def child(self, h, i: int):
        raise NotImplementedError

    def chance_probs(self, h) -> np.ndarray:
        raise NotImplementedError

    def utility(self, h) -> float:
        """Utility of P1 at a terminal; P2 receives the negation."""
        raise NotImplementedError

    def infoset_key(self, h, player: Player) -> bytes:
        raise NotImplementedError

    def public_key(self, h) -> bytes:
        raise NotImplementedError

    def history(self, h) -> tuple[int, ...]:
        raise NotImplementedError

    # conveniences shared by all games

    def is_terminal(self, h) -> bool:
        return self.role(h) == Player.TERMINAL

    def children(self, h) -> list:
        return [self.child(h, i) for i in range(len(self.legal_actions(h)))]

    def utility_p2(self, h) -> float:
        return -self.utility(h)

    def walk(self, h, i: int):
        return self.child(h, i)


class State:
    """History handle of an implicit game.

    Equality and hashing use the action-index history only; ``data`` is the
    game-specific payload and ``keys`` caches (P1 key, P2 key, public key).
    """

    __slots__ = ("history", "data", "keys")

    def __init__(self, history: tuple[int, ...], data, keys: tuple[bytes, bytes, bytes]):
        self.history = history
        self.data = data
        self.keys = keys

    def __hash__(self) -> int:
        return hash(self.history)

    def __eq__(self, other) -> bool:
        return isinstance(other, State) and other.history == self.history

    def __repr__(self) -> str:
        return f"State{self.history}"


class ImplicitGame(Game):
    """Base for games defined by a transition function over payloads.

    Subclasses implement ``_initial``, ``_role``, ``_actions``, ``_next``,
    ``_chance_probs`` and ``_utility``.  ``_next`` returns the successor
    payload and the observation tokens ``(p1, p2, public)`` of that step.
    Keys are the ``/``-joined token sequences, so perfect recall and the
    public-state refinement hold by construction as long as each player's
    token determines the public token.
    """

    def _initial(self):
        raise NotImplementedError

    def _role(self, data) -> Player:
        raise NotImplementedError

    def _actions(self, data) -> tuple[str, ...]:
        raise NotImplementedError

    def _next(self, data, i: int):
        raise NotImplementedError

    def _chance_probs(self, data) -> np.ndarray:
        raise NotImplementedError

    def _utility(self, data) -> float:
        raise NotImplementedError

    def root(self) -> State:
        return State((), self._initial(), (b"", b"", b""))

    def role(self, h: State) -> Player:
        return self._role(h.data)

    def legal_actions(self, h: State) -> tuple[str, ...]:
        return self._actions(h.data)

    def child(self, h: State, i: int) -> State:
        data, (t1, t2, tp) = self._next(h.data, i)
        k1, k2, kp = h.keys
        return State(
            h.history + (i,),
            data,
            (k1 + SEP + t1.encode(), k2 + SEP + t2.encode(), kp + SEP + tp.encode()),
        )

    def chance_probs(self, h: State) -> np.ndarray:
        return self._chance_probs(h.data)

    def utility(self, h: State) -> float:
        return self._utility(h.data)

    def infoset_key(self, h: State, player: Player) -> bytes:
        return h.keys[int(player)]

    def public_key(self, h: State) -> bytes:
        return h.keys[2]

    def history(self, h: State) -> tuple[int, ...]:
        return h.history

    def replay(self, history: Iterable[int]) -> State:
        h = self.root()
        for i in history:
            h = self.child(h, i)
        return h


# ---------------------------------------------------------------------------
# strategies


class Strategy:
    """Behavioural strategy of one player, queried by (infoset key, labels)."""

    player: Player
    name: str = "strategy"

    def probs_at(self, key: bytes, labels: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def probs(self, game: Game, h) -> np.ndarray:
        return self.probs_at(game.infoset_key(h, self.player), game.legal_actions(h))

    def covers(self, key: bytes) -> bool:
        return True


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


class UniformStrategy(Strategy):
    def __init__(self, player: Player, name: str = "uniform"):
        self.player = Player(player)
        self.name = name

    def probs_at(self, key, labels):
        return _uniform(len(labels))


class PolicyStrategy(Strategy):
    """Strategy given by a function of (infoset key, legal labels).

    Results are memoised per key; ``hint`` carries optional structure a game
    can exploit for fast sampling (see the Battleships shooters).
    """

    def __init__(self, player: Player, fn: Callable[[bytes, Sequence[str]], Sequence[float]],
                 name: str, hint=None):
        self.player = Player(player)
        self.fn = fn
        self.name = name
        self.hint = hint
        self._memo: dict[bytes, np.ndarray] = {}

    def probs_at(self, key, labels):
        out = self._memo.get(key)
        if out is None:
            out = np.asarray(self.fn(key, labels), dtype=float)
            if len(self._memo) < 2_000_000:
                self._memo[key] = out
        return out


class TabularStrategy(Strategy):
    """Explicit table ``key -> (labels, probabilities)``.

    Unknown keys fall back to uniform (the usual completion off the support);
    ``covers`` lets evaluators detect genuinely missing entries.
    """

    def __init__(self, player: Player, table: dict[bytes, tuple[tuple[str, ...], np.ndarray]] | None = None,
                 name: str = "tabular", partial: bool = False):
        self.player = Player(player)
        self.table = dict(table or {})
        self.name = name
        # partial tables describe only part of the game (e.g. a continuation)
        self.partial = partial

    def probs_at(self, key, labels):
        entry = self.table.get(key)
        if entry is None:
            return _uniform(len(labels))
        return entry[1]

    def covers(self, key) -> bool:
        return key in self.table

    def set(self, key: bytes, labels: Sequence[str], probs) -> None:
        probs = np.asarray(probs, dtype=float)
        if len(probs) != len(labels):
            raise GameError(f"infoset {key!r}: {len(probs)} probabilities for {len(labels)} actions")
        self.table[key] = (tuple(labels), probs)

    def update(self, other: "TabularStrategy") -> None:
        self.table.update(other.table)

    def copy(self, name: str | None = None) -> "TabularStrategy":
        return TabularStrategy(self.player, self.table, name or self.name, self.partial)

    def __len__(self) -> int:
        return len(self.table)

    def validate(self, tol: float = PROB_TOL) -> None:
        for key, (labels, probs) in self.table.items():
            if np.any(probs < -tol) or abs(probs.sum() - 1.0) > tol:
                raise GameError(f"infoset {key!r}: not a distribution: {probs}")


def tabulate(game: Game, strategy: Strategy, cap: int | None = None) -> TabularStrategy:
    """Materialise any strategy over every infoset of its player."""
    out = TabularStrategy(strategy.player, name=strategy.name)
    for info in enumerate_infosets(game, strategy.player, cap):
        out.set(info.key, info.labels, strategy.probs_at(info.key, info.labels))
    return out


# ---------------------------------------------------------------------------
# traversal utilities


@dataclass(frozen=True)
class ReachTriple:
    reach_p1: float
    reach_p2: float
    reach_chance: float

    @property
    def joint(self) -> float:
        return self.reach_p1 * self.reach_p2 * self.reach_chance


@dataclass
class InfosetInfo:
    key: bytes
    player: Player
    labels: tuple[str, ...]
    members: list


def iter_histories(game: Game, cap: int | None = None):
    """Depth-first pre-order over all histories; raises past the node cap."""
    cap = node_cap() if cap is None else cap
    stack = [game.root()]
    count = 0
    while stack:
        h = stack.pop()
        count += 1
        if count > cap:
            raise NodeCapExceeded(count, cap)
        yield h
        if game.role(h) != Player.TERMINAL:
            n = len(game.legal_actions(h))
            stack.extend(game.child(h, i) for i in range(n - 1, -1, -1))


def enumerate_infosets(game: Game, player: Player, cap: int | None = None) -> list[InfosetInfo]:
    """Infosets where ``player`` acts, sorted by key bytes."""
    found: dict[bytes, InfosetInfo] = {}
    for h in iter_histories(game, cap):
        if game.role(h) != player:
            continue
        key = game.infoset_key(h, player)
        labels = game.legal_actions(h)
        info = found.get(key)
        if info is None:
            found[key] = InfosetInfo(key, Player(player), labels, [h])
        else:
            if info.labels != labels:
                raise GameError(f"infoset {key!r} has inconsistent legal actions")
            info.members.append(h)
    return [found[k] for k in sorted(found)]


def uniform_strategy(game: Game, player: Player) -> UniformStrategy:
    return UniformStrategy(player)


def reach(game: Game, s1: Strategy, s2: Strategy, h) -> ReachTriple:
    """Per-actor reach probabilities of ``h`` under the profile."""
    r = [1.0, 1.0, 1.0]
    node = game.root()
    for i in game.history(h):
        role = game.role(node)
        if role == Player.CHANCE:
            r[2] *= float(game.chance_probs(node)[i])
        elif role == Player.P1:
            r[0] *= float(s1.probs(game, node)[i])
        elif role == Player.P2:
            r[1] *= float(s2.probs(game, node)[i])
        else:
            raise GameError("history continues past a terminal")
        node = game.child(node, i)
    return ReachTriple(r[0], r[1], r[2])


def as_tree(game: Game, cap: int | None = None):
    """Materialised view of ``game``, cached on the game instance."""
    from .tree import Tree, materialize

    if isinstance(game, Tree):
        return game
    tree = getattr(game, "_tree_cache", None)
    if tree is None:
        tree = materialize(game, cap=cap)
        game._tree_cache = tree
    return tree


def expected_utility(game: Game, s1: Strategy, s2: Strategy, cap: int | None = None) -> float:
    """Exact expected P1 utility of the profile by full-tree evaluation."""
    from .tree import strategy_slots
    from . import _kernels as K

    tree = as_tree(game, cap)
    sig = strategy_slots(tree, s1) + strategy_slots(tree, s2)
    check_coverage(tree, s1, s2, sig)
    return float(K.expected_utility(tree.roles, tree.parent, tree.slot, tree.chance_prob, tree.utilities, sig))


def check_coverage(tree, s1: Strategy, s2: Strategy, sig: np.ndarray) -> None:
    """Raise if a strategy lacks an infoset that the profile reaches."""
    missing = [
        (inf, s) for s in (s1, s2) for inf in tree.infosets_of(s.player)
        if not s.covers(tree.inf_keys[inf])
    ]
    if not missing:
        return
    from . import _kernels as K

    r = K.joint_reach(tree.roles, tree.parent, tree.slot, tree.chance_prob, sig)
    reached = np.zeros(tree.num_infosets)
    np.add.at(reached, tree.infoset[tree.decision_nodes], r[tree.decision_nodes])
    for inf, s in missing:
        if reached[inf] > 0.0:
            raise MissingInfosetError(tree.inf_keys[inf], s.player)


@dataclass
class Portfolio:
    """Named, ordered continuation strategies of one player."""

    owner: Player
    entries: list[tuple[str, Strategy]]

    def __post_init__(self):
        if not self.entries:
            raise GameError("portfolio must be nonempty")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    @property
    def strategies(self) -> list[Strategy]:
        return [s for _, s in self.entries]

    def with_entry(self, name: str, strategy: Strategy) -> "Portfolio":
        return Portfolio(self.owner, self.entries + [(name, strategy)])
