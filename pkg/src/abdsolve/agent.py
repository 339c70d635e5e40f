"""Online play by depth-limited re-solving of the robust adaptation game.

At each public state where P1 acts, the agent builds a resolve game:

* a root chance node splits mass ``p`` (opponent follows the model) from
  ``1 - p`` (opponent is rational); only P2 observes the outcome;
* the fixed branch starts at a chance node over the histories of the public
  state, weighted by the reach of the already-played trunk (P1's recorded
  strategy x the model x chance), with the residual mass sent to a
  zero-utility terminal so the branch keeps the same weight relative to the
  free branch as in the full robust game;
* the free branch replays the trunk from the root: P1's trunk decisions are
  chance nodes following the record, P2 chooses freely, and every move that
  leaves the public path ends in a matrix-valued leaf;
* both branches are cut after ``d`` opponent moves with matrix-valued leaves.

The resolved strategy of every P1 infoset of the public state is appended to
the trunk.  With ``p = 1`` the fast path re-solves only the current infoset
by a single backward-induction pass.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .depthlimit import (
    Bindings,
    DepthSpec,
    LeafEvaluator,
    Lookahead,
    PortfolioLike,
    ValueSource,
    add_matrix_leaf,
    bind_fixed_edges,
    bind_leaf_values,
    expand,
)
from .efg import (
    Game,
    GameError,
    NodeCapExceeded,
    Player,
    Strategy,
    TabularStrategy,
    as_tree,
    expected_utility,
)
from .rng import CounterRNG, derive_seed
from .solver import CfrConfig, cfr_solve, game_value
from .tree import Tree, TreeBuilder

log = logging.getLogger(__name__)

FIXED_TAG = b"fix|"
FREE_TAG = b"free|"
MATERIALIZE_CAP = 500_000


def resolve_cfr(iterations: int = 1000, target: float | None = 1e-6) -> CfrConfig:
    """Default per-resolve solver: predictive CFR+ with quadratic averaging."""
    return CfrConfig(iterations=iterations, variant="predictive", averaging="quadratic",
                     target_nash_conv=target, check_every=100)


class InconsistentObservation(GameError):
    def __init__(self, key: bytes):
        super().__init__(f"infoset {key!r} does not occur in the resolve game")
        self.key = key


@dataclass
class AgentConfig:
    p: float
    depth: int
    p1_portfolio: PortfolioLike
    p2_portfolio: PortfolioLike
    fixed_opponent: Strategy
    values: ValueSource = field(default_factory=ValueSource)
    cfr: CfrConfig = field(default_factory=resolve_cfr)
    # beyond the depth limit the fixed branch uses the model ("portfolio") or
    # a rational opponent playing the actual continuation ("rational")
    fixed_beyond: str = "portfolio"
    append_fixed_column: bool = False
    prune_fixed: bool = False  # drop zero-probability model edges (no template reuse)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise GameError(f"p must lie in [0, 1], got {self.p}")
        DepthSpec(self.depth)
        if self.fixed_beyond not in ("portfolio", "rational"):
            raise GameError(f"unknown fixed_beyond {self.fixed_beyond!r}")


@dataclass
class TrunkRecord:
    """P1's behaviour on every infoset resolved so far in the episode."""

    strategy: TabularStrategy = field(default_factory=lambda: TabularStrategy(Player.P1, name="trunk"))
    public_states: list = field(default_factory=list)

    def record(self, key: bytes, labels, probs) -> None:
        if key in self.strategy.table:
            return  # append-only
        self.strategy.set(key, labels, probs)

    def covers(self, key: bytes) -> bool:
        return self.strategy.covers(key)


@dataclass
class ResolveGame:
    tree: Tree
    bindings: Bindings
    public_key: bytes
    histories: list
    p: float


def on_public_path(key: bytes, s_key: bytes) -> bool:
    return s_key == key or s_key.startswith(key + b"/")


def public_state_histories(game: Game, s_key: bytes) -> list:
    """All histories whose public key equals ``s_key`` (depth-first order)."""
    index = getattr(game, "_public_index", None)
    if index is None and isinstance(game, Tree) and game.node_keys is not None:
        index = {}
        for n, keys in enumerate(game.node_keys):
            index.setdefault(keys[2], []).append(n)
        game._public_index = index
    if index is not None:
        return list(index.get(s_key, []))
    out = []
    stack = [game.root()]
    while stack:
        h = stack.pop()
        k = game.public_key(h)
        if k == s_key:
            out.append(h)
            continue
        if game.role(h) == Player.TERMINAL or not on_public_path(k, s_key):
            continue
        for i in range(len(game.legal_actions(h)) - 1, -1, -1):
            c = game.child(h, i)
            if on_public_path(game.public_key(c), s_key):
                stack.append(c)
    return out


def path_reach(game: Game, h, s1: Strategy, s2: Strategy) -> float:
    """Joint reach of ``h`` under (s1, s2) and chance."""
    if isinstance(game, Tree):
        r = 1.0
        n = int(h)
        while n > 0:
            p = int(game.parent[n])
            role = game.roles[p]
            if role == 2:
                r *= game.chance_prob[n]
            else:
                s = s1 if role == 0 else s2
                inf = game.infoset[p]
                r *= s.probs_at(game.inf_keys[inf], game.inf_labels[inf])[game.action_index[n]]
            if r == 0.0:
                return 0.0
            n = p
        return float(r)
    from .efg import reach

    return reach(game, s1, s2, h).joint


def _trunk_replica(b: TreeBuilder, bind: Bindings, game: Game, h, parent: int, prob: float,
                   s_key: bytes, la: Lookahead) -> int:
    if game.public_key(h) == s_key:
        return expand(b, bind, game, h, parent, prob, la, 0)
    role = game.role(h)
    labels = game.legal_actions(h)
    if role == Player.CHANCE:
        node = b.add(parent, Player.CHANCE, labels=labels, prob=prob, origin=h)
        probs = [float(q) for q in game.chance_probs(h)]
    elif role == Player.P1:
        node = b.add(parent, Player.CHANCE, labels=labels, prob=prob, origin=h)
        probs = [0.0] * len(labels)
    else:
        k2 = game.infoset_key(h, Player.P2)
        node = b.add(parent, Player.P2, key=la.tag + k2, labels=labels, prob=prob, origin=h)
        probs = [1.0] * len(labels)
    k1 = game.infoset_key(h, Player.P1)
    for i in range(len(labels)):
        c = game.child(h, i)
        if on_public_path(game.public_key(c), s_key):
            n = _trunk_replica(b, bind, game, c, node, probs[i], s_key, la)
        elif game.role(c) == Player.TERMINAL:
            n = b.add(node, Player.TERMINAL, prob=probs[i], utility=game.utility(c), origin=c)
        else:
            n = add_matrix_leaf(b, bind, game, c, node, probs[i], la)
        if role == Player.P1:
            bind.trunk_edges.append((n, k1, labels, i))
    return node


def build_resolve_structure(game: Game, s_key: bytes, cfg: AgentConfig) -> ResolveGame:
    """Opponent- and trunk-independent structure of the resolve game."""
    hs = public_state_histories(game, s_key)
    if not hs:
        raise GameError(f"public state {s_key!r} has no histories")
    b = TreeBuilder(f"resolve({getattr(game, 'game_id', 'game')})")
    bind = Bindings()
    p = cfg.p
    labels = (["fixed"] if p > 0 else []) + (["free"] if p < 1 else [])
    root = b.add(-1, Player.CHANCE, labels=labels)
    if p > 0:
        fx = b.add(root, Player.CHANCE, labels=[f"h{i}" for i in range(len(hs))] + ["rest"], prob=p)
        bind.branch_nodes["fixed"] = fx
        la = Lookahead(cfg.depth, cfg.p1_portfolio, None, fixed=True, tag=FIXED_TAG,
                       beyond=cfg.fixed_beyond, prune=cfg.fixed_opponent if cfg.prune_fixed else None,
                       s_key=s_key)
        for h in hs:
            c = expand(b, bind, game, h, fx, 0.0, la, 0)
            bind.fixed_roots.append((c, h))
        bind.fixed_dummy = b.add(fx, Player.TERMINAL, prob=0.0, utility=0.0)
    if p < 1:
        la = Lookahead(cfg.depth, cfg.p1_portfolio, cfg.p2_portfolio, fixed=False, tag=FREE_TAG,
                       extra_p2=cfg.fixed_opponent if cfg.append_fixed_column else None, s_key=s_key)
        fr = _trunk_replica(b, bind, game, game.root(), root, 1.0 - p, s_key, la)
        bind.branch_nodes["free"] = fr
    tree = b.finalize(keep_origin=False)
    return ResolveGame(tree, bind.remap(b.new_id), s_key, hs, p)


def bind_resolve(rg: ResolveGame, game: Game, sigma2: Strategy, trunk: TrunkRecord,
                 evaluator: LeafEvaluator, p: float | None = None) -> None:
    """Write p, model, trunk and leaf numbers into the resolve structure."""
    p = rg.p if p is None else p
    rg.p = p
    tree, bind = rg.tree, rg.bindings
    for branch, q in (("fixed", p), ("free", 1.0 - p)):
        if branch in bind.branch_nodes:
            tree.chance_prob[bind.branch_nodes[branch]] = q
    if bind.fixed_edges:
        bind_fixed_edges(tree, bind, sigma2)
    if bind.trunk_edges:
        bind_fixed_edges(tree, Bindings(fixed_edges=bind.trunk_edges), trunk.strategy)
    if bind.fixed_roots:
        w = np.array([path_reach(game, h, trunk.strategy, sigma2) for _, h in bind.fixed_roots])
        total = w.sum()
        if total <= 0.0:
            log.warning("model assigns zero reach to public state %r; using uniform weights", rg.public_key)
            w = np.full(len(w), 1.0 / len(w))
            total = 1.0
        nodes = np.array([n for n, _ in bind.fixed_roots], dtype=np.int64)
        tree.chance_prob[nodes] = w
        tree.chance_prob[bind.fixed_dummy] = max(0.0, 1.0 - total)
    bind_leaf_values(tree, bind, game, sigma2, evaluator)


def fixed_branch_weights(rg: ResolveGame) -> np.ndarray:
    """Normalised chance weights over the public-state histories in the fixed branch."""
    nodes = np.array([n for n, _ in rg.bindings.fixed_roots], dtype=np.int64)
    w = rg.tree.chance_prob[nodes]
    return w / w.sum()


class ABDAgent:
    """Per-episode agent; ``trunk`` accumulates the resolved strategy."""

    def __init__(self, game: Game, cfg: AgentConfig, work: Game | None = None,
                 templates: dict | None = None, evaluator: LeafEvaluator | None = None):
        self.game = game
        self.cfg = cfg
        self.work = work if work is not None else working_game(game)
        self.trunk = TrunkRecord()
        self.templates = {} if templates is None else templates
        self.evaluator = evaluator or LeafEvaluator(self.work, cfg.values)
        self.last_visits = 0
        self.last_tree_size = 0
        self.resolves = 0

    def reset(self) -> None:
        self.trunk = TrunkRecord()

    # --- handles -----------------------------------------------------------

    def _handle(self, h):
        """Map a history of the base game to the working game."""
        if self.work is self.game:
            return h
        if isinstance(self.game, Tree):
            return h
        node = 0
        for i in self.game.history(h):
            node = self.work.child(node, i)
        return node

    def _template(self, key, builder):
        c = self.cfg
        # structures depend on these settings but not on p inside (0, 1)
        key = key + (c.depth, id(c.p1_portfolio), id(c.p2_portfolio), c.fixed_beyond, c.append_fixed_column)
        if c.prune_fixed:
            key = key + (id(c.fixed_opponent),)
        rg = self.templates.get(key)
        if rg is None:
            rg = builder()
            self.templates[key] = rg
        return rg

    # --- resolving ---------------------------------------------------------

    def resolve_public_state(self, s_key: bytes) -> ResolveGame:
        rg = self._template(("cfr", s_key, self.cfg.p > 0, self.cfg.p < 1),
                            lambda: build_resolve_structure(self.work, s_key, self.cfg))
        bind_resolve(rg, self.work, self.cfg.fixed_opponent, self.trunk, self.evaluator, self.cfg.p)
        rep = cfr_solve(rg.tree, self.cfg.cfr)
        avg = rep.strategies[0]
        for key in sorted(rg.bindings.s_keys):
            labels, probs = avg.table[key]
            self.trunk.record(key, labels, probs)
        self.trunk.public_states.append(s_key)
        self.last_tree_size = rg.tree.num_nodes
        self.resolves += 1
        self.last_report = rep
        return rg

    def resolve(self, h) -> np.ndarray:
        """CFR re-solve of the public state containing ``h``; P1's distribution at ``h``."""
        w = self._handle(h)
        if self.work.role(w) != Player.P1:
            raise GameError("resolve is only defined at P1 decisions")
        key = self.work.infoset_key(w, Player.P1)
        if not self.trunk.covers(key):
            rg = self.resolve_public_state(self.work.public_key(w))
            if key not in rg.bindings.s_keys:
                raise InconsistentObservation(key)
        return np.array(self.trunk.strategy.table[key][1])

    def fast_best_response_resolve(self, h) -> np.ndarray:
        """p = 1 shortcut: one backward-induction pass from the current infoset."""
        if self.cfg.p != 1.0:
            raise GameError("the fast path requires p = 1")
        w = self._handle(h)
        key = self.work.infoset_key(w, Player.P1)
        if self.trunk.covers(key):
            return np.array(self.trunk.strategy.table[key][1])
        probs = self.fast_infoset(key, self.work.public_key(w))
        return probs

    def fast_infoset(self, key: bytes, s_key: bytes) -> np.ndarray:
        tree, bind, members = self._template(("fast", key), lambda: build_fast_structure(self.work, key, s_key, self.cfg))
        sigma2 = self.cfg.fixed_opponent
        if bind.fixed_edges:
            bind_fixed_edges(tree, bind, sigma2)
        w = np.array([path_reach(self.work, h, _ONES, sigma2) for _, h in bind.fixed_roots])
        if w.sum() <= 0.0:
            log.warning("model assigns zero reach to infoset %r; using uniform weights", key)
            w = np.ones(len(w))
        tree.chance_prob[np.array([n for n, _ in bind.fixed_roots], dtype=np.int64)] = w / w.sum()
        bind_leaf_values(tree, bind, self.work, sigma2, self.evaluator)
        _, br, visits = K.best_response(tree.roles, tree.parent, tree.slot, tree.infoset, tree.inf_player,
                                        tree.inf_first, tree.inf_nact, tree.chance_prob, tree.utilities,
                                        np.zeros(tree.num_slots), 0)
        self.last_visits = int(visits)
        self.last_tree_size = tree.num_nodes
        self.resolves += 1
        inf = tree.key_index[(0, key)]
        lo = tree.inf_first[inf]
        probs = br[lo:lo + tree.inf_nact[inf]].copy()
        self.trunk.record(key, tree.inf_labels[inf], probs)
        return probs

    def fast_action_values(self, key: bytes, s_key: bytes) -> np.ndarray:
        """Optimal look-ahead value of each action at ``key`` (after a fast resolve)."""
        tree, bind, _ = self._template(("fast", key), lambda: build_fast_structure(self.work, key, s_key, self.cfg))
        q = K.sequence_values(tree.roles, tree.parent, tree.slot, tree.infoset, tree.inf_player, tree.inf_first,
                              tree.inf_nact, tree.chance_prob, tree.utilities, np.zeros(tree.num_slots), 0)
        inf = tree.key_index[(0, key)]
        lo = tree.inf_first[inf]
        return q[lo:lo + tree.inf_nact[inf]].copy()

    def act(self, h, fast: bool | None = None) -> np.ndarray:
        fast = self.cfg.p == 1.0 and self.cfg.fixed_beyond == "portfolio" if fast is None else fast
        return self.fast_best_response_resolve(h) if fast else self.resolve(h)


class _Ones(Strategy):
    """Placeholder strategy with probability one on every action."""

    player = Player.P1

    def probs_at(self, key, labels):
        return np.ones(len(labels))


_ONES = _Ones()


def build_fast_structure(game: Game, key: bytes, s_key: bytes, cfg: AgentConfig):
    hs = [h for h in public_state_histories(game, s_key)
          if game.role(h) == Player.P1 and game.infoset_key(h, Player.P1) == key]
    if not hs:
        raise InconsistentObservation(key)
    b = TreeBuilder(f"fast({getattr(game, 'game_id', 'game')})")
    bind = Bindings()
    root = b.add(-1, Player.CHANCE, labels=[f"h{i}" for i in range(len(hs))])
    la = Lookahead(cfg.depth, cfg.p1_portfolio, None, fixed=True, tag=FIXED_TAG,
                   prune=cfg.fixed_opponent if cfg.prune_fixed else None)
    for h in hs:
        c = expand(b, bind, game, h, root, 0.0, la, 0)
        bind.fixed_roots.append((c, h))
    tree = b.finalize(keep_origin=False)
    return tree, bind.remap(b.new_id), hs


def working_game(game: Game, cap: int = MATERIALIZE_CAP) -> Game:
    """Materialised tree when the game is small enough, else the game itself."""
    if isinstance(game, Tree):
        return game
    try:
        return as_tree(game, cap=cap)
    except NodeCapExceeded:
        return game


# ---------------------------------------------------------------------------
# composite strategies and evaluation


def p1_public_states(tree: Tree) -> list[bytes]:
    """Public keys of P1 decision states, shallowest first."""
    first: dict[bytes, int] = {}
    for n in tree.decision_nodes:
        if tree.roles[n] == 0:
            k = tree.node_keys[n][2]
            first.setdefault(k, int(n))
    return sorted(first, key=lambda k: (tree.depth[first[k]], first[k]))


def composite_strategy(agent: ABDAgent, fast: bool | None = None) -> TabularStrategy:
    """Episode strategy: resolve every public state P1 can reach under its own play.

    States are processed shallowest first, so each resolve sees the trunk of
    its ancestors; states P1's own strategy never reaches are left uniform.
    With ``p = 1`` states the model never reaches are skipped as well.
    """
    tree = agent.work
    if not isinstance(tree, Tree):
        raise GameError("composite strategies need a materialisable game")
    fast = agent.cfg.p == 1.0 and agent.cfg.fixed_beyond == "portfolio" if fast is None else fast
    by_state: dict[bytes, list[int]] = {}
    for n in tree.decision_nodes:
        if tree.roles[n] == 0:
            by_state.setdefault(tree.node_keys[n][2], []).append(int(n))
    for s_key in p1_public_states(tree):
        nodes = by_state[s_key]
        if agent.cfg.p == 1.0:
            # only play against the model matters
            r = np.array([path_reach(tree, n, agent.trunk.strategy, agent.cfg.fixed_opponent) for n in nodes])
        else:
            r = np.array([_own_reach(tree, n, agent.trunk.strategy) for n in nodes])
        if not np.any(r > 0):
            continue
        if fast:
            seen = set()
            for n, rn in zip(nodes, r):
                key = tree.inf_keys[tree.infoset[n]]
                if rn > 0 and key not in seen:
                    seen.add(key)
                    if not agent.trunk.covers(key):
                        agent.fast_infoset(key, s_key)
        else:
            agent.resolve_public_state(s_key)
    out = agent.trunk.strategy.copy(name="composite")
    for k in tree.infosets_of(Player.P1):
        key = tree.inf_keys[k]
        if not out.covers(key):
            m = tree.inf_nact[k]
            out.set(key, tree.inf_labels[k], np.full(m, 1.0 / m))
    return out


def _own_reach(tree: Tree, n: int, s: Strategy) -> float:
    r = 1.0
    while n > 0:
        p = int(tree.parent[n])
        if tree.roles[p] == 0:
            inf = tree.infoset[p]
            r *= s.probs_at(tree.inf_keys[inf], tree.inf_labels[inf])[tree.action_index[n]]
            if r == 0.0:
                return 0.0
        n = p
    return r


def cdbr_baseline(game: Game, sigma2fix: Strategy, d: int, cfg: CfrConfig | None = None,
                  p1_portfolio: PortfolioLike | None = None, work: Game | None = None,
                  templates: dict | None = None) -> tuple[TabularStrategy, float]:
    """Continual depth-limited best response with rational play beyond the cut.

    Below the depth limit the opponent is a rational player of the actual
    game (the optimal value function), so the model is only trusted for the
    first ``d`` opponent moves.
    """
    from .efg import Portfolio, UniformStrategy

    pf = p1_portfolio or Portfolio(Player.P1, [("unused", UniformStrategy(Player.P1))])
    acfg = AgentConfig(p=1.0, depth=d, p1_portfolio=pf, p2_portfolio=pf, fixed_opponent=sigma2fix,
                       cfr=cfg or resolve_cfr(), fixed_beyond="rational")
    agent = ABDAgent(game, acfg, work=work, templates=templates)
    s = composite_strategy(agent, fast=False)
    return s, expected_utility(agent.work, s, sigma2fix)


@dataclass
class MatchStats:
    mean: float
    ci95: float
    gain: float
    episodes: int
    seconds: float


def play_match(agent_builder, opponent: Strategy, episodes: int, seed: int, exact: bool = False,
               value: float | None = None) -> MatchStats:
    """Evaluate a fresh agent per episode against ``opponent``.

    ``exact`` replaces simulation by the exact expectation of the episode
    composite strategy (one episode suffices for deterministic agents).
    """
    start = time.perf_counter()
    agent = agent_builder()
    v = game_value(agent.game) if value is None else value
    if exact:
        s = composite_strategy(agent)
        mean = expected_utility(agent.work, s, opponent)
        return MatchStats(mean, 0.0, mean - v, 1, time.perf_counter() - start)
    results = []
    game = agent.game
    for ep in range(episodes):
        if ep > 0:
            agent = agent_builder()
        rng = CounterRNG(derive_seed(seed, ep))
        h = game.root()
        while game.role(h) != Player.TERMINAL:
            role = game.role(h)
            if role == Player.CHANCE:
                probs = game.chance_probs(h)
            elif role == Player.P1:
                probs = agent.act(h)
            else:
                probs = opponent.probs(game, h)
            h = game.child(h, rng.choice(probs))
        results.append(game.utility(h))
    arr = np.array(results)
    mean = float(arr.mean())
    ci = 1.96 * float(arr.std(ddof=1)) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
    return MatchStats(mean, ci, mean - v, episodes, time.perf_counter() - start)
