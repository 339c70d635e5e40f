"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured numbers.
"""
import csv
import math

import numpy as np
import pytest

from abdsolve import Player, TabularStrategy, UniformStrategy
from abdsolve.agent import ABDAgent, AgentConfig, resolve_cfr
from abdsolve.depthlimit import PF1, DepthSpec, ValueSource, cut_frontier, enumerate_pure_continuations, exact_value, \
    pure_portfolio_by_key, sampled_fixed_value
from abdsolve.games import BattleshipsConfig, LinesToy, MatchingPennies, build_battleships, build_kuhn, builtin_portfolio, \
    scripted_opponent
from abdsolve.harness.config import ExperimentSpec, RunConfig, parse_config_text
from abdsolve.harness.experiments import run_experiment, run_pareto, run_table1, run_table2, run_table3
from abdsolve.robust import RobustSpec, restricted_nash_response
from abdsolve.solver import CfrConfig, best_response, cfr_solve, exploitability, gain

from conftest import CRITERIA, KUHN_VALUE
from episodes import agreement
from oracles import brute_eu, enumerate_best_value, infosets

pytestmark = pytest.mark.acceptance


def record(n: int, ok: bool, detail: str) -> None:
    CRITERIA[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(CRITERIA[n])


def test_c1_table1():
    res = run_table1(RunConfig())
    values = {(r[0], r[1]): r[2] for r in res.rows}
    want = {("CDBR", d): v for d, v in zip(range(1, 5), (0.25, 0.25, 1.0, 1.0))}
    want.update({("ABD", d): 1.0 for d in range(1, 5)})
    worst = max(abs(values[k] - v) for k, v in want.items())
    seconds = sum(r[3] for r in res.rows)
    ok = set(values) == set(want) and worst <= 0.01 and seconds < 60
    record(1, ok, f"max |value - target| = {worst:.2e}, {seconds:.1f}s")
    assert ok


def test_c2_game_value(bs22):
    rep = cfr_solve(bs22, CfrConfig(iterations=5000))
    ok = abs(rep.value - 0.25) <= 0.005
    record(2, ok, f"value {rep.value:.5f}, NashConv {rep.nash_conv:.1e}")
    assert ok


def test_c3_battleships_pareto():
    res = run_pareto(RunConfig({"game": "battleships"}), 0, "battleships")
    curves: dict[str, dict[float, tuple]] = {}
    for curve, p, g, e, _ in res.rows:
        curves.setdefault(curve, {})[p] = (g, e)
    misses = []
    for p, (g, e) in curves["abd"].items():
        rg, re = curves["rnr"][p]
        miss = max(abs(g - rg), abs(e - re))
        if miss > 0.02:
            # objective of the restricted game; equal values mean both points solve it
            obj = p * (g - rg) - (1 - p) * (e - re)
            misses.append(f"p={p:g} miss {miss:.4f} (objective diff {obj:+.4f})")
    baseline = max(g for g, _ in curves["cdrnr"].values())
    ok = not misses and baseline <= 0.02
    record(3, ok, f"baseline max gain {baseline:.4f}; " + ("; ".join(misses) or "all points within 0.02"))
    assert ok


def test_c4_table2_ordering():
    res = run_table2(RunConfig({"game": "leduc"}))
    rows = {(r[0], r[1]): (r[2], r[3]) for r in res.rows}
    cd = {o: rows[("CDBR", o)] for o in ("S1", "S2", "S3", "S4", "Random")}
    ab = {o: rows[("ABD", o)] for o in ("S1", "S2", "S3", "S4", "Random")}
    order = all(ab[o][0] >= cd[o][0] - 1e-9 for o in ("S1", "S2", "S3", "S4"))
    strict = all(ab[o][0] > cd[o][0] + 1e-9 for o in ("S1", "S3", "S4"))
    (mc, hc), (ma, ha) = cd["Random"], ab["Random"]
    random_ok = ma - ha > mc + hc
    reference = {"CDBR": (1, 5, 1, 3), "ABD": (2.3, 5, 4.2, 5)}
    far = [f"{m} {o}" for m, tab in (("CDBR", cd), ("ABD", ab))
           for o, ref in zip(("S1", "S2", "S3", "S4"), reference[m]) if abs(tab[o][0] - ref) > 0.5]
    ok = order and strict and random_ok
    record(4, ok, f"S1-S4 CDBR {[round(cd[o][0], 3) for o in ('S1', 'S2', 'S3', 'S4')]} "
                  f"ABD {[round(ab[o][0], 3) for o in ('S1', 'S2', 'S3', 'S4')]}; "
                  f"Random CDBR {mc:.4f}+-{hc:.4f} ABD {ma:.4f}+-{ha:.4f}; "
                  f"outside +-0.5 of reference (not gating): {', '.join(far) or 'none'}")
    assert ok


def test_c5_table3_trend():
    res = run_table3(RunConfig())
    fr = [r[1] for r in res.rows]
    mono = all(b >= a - 0.01 for a, b in zip(fr, fr[1:]))
    ok = mono and fr[0] < 1.0 and fr[-1] == 1.0
    record(5, ok, f"fractions {fr} at samples {[r[0] for r in res.rows]}, {sum(r[3] for r in res.rows):.0f}s")
    assert ok


def _lazy_pure(tree, owner):
    """All reduced pure continuations of ``owner`` below any of its cut keys."""
    groups: dict[bytes, list[int]] = {}
    for n in range(1, tree.num_nodes):
        k = tree.node_keys[n][int(owner)]
        if tree.node_keys[int(tree.parent[n])][int(owner)] != k:
            groups.setdefault(k, []).append(n)
    cache = {}

    def lookup(key):
        if key not in cache:
            cache[key] = enumerate_pure_continuations(tree, groups[key], owner)
        return cache[key]

    return lookup


def _root_resolve_strategy(agent) -> TabularStrategy:
    """Full P1 strategy from one root resolve: trunk plus leaf mixtures of pure plans."""
    work = agent.work
    rg = agent.resolve_public_state(work.public_key(0))
    avg = agent.last_report.strategies[0]
    cuts = {h for _, h, *_ in rg.bindings.leaves}
    kids = [[] for _ in range(work.num_nodes)]
    for n in range(1, work.num_nodes):
        kids[int(work.parent[n])].append(n)
    num: dict[bytes, np.ndarray] = {}
    stack = [(0, None, None)]
    while stack:
        n, plans, w = stack.pop()
        if n in cuts:
            k1 = work.infoset_key(n, Player.P1)
            plans = agent.cfg.p1_portfolio(k1).strategies
            w = np.asarray(avg.table[PF1 + k1][1])
        if work.roles[n] == 0 and plans is not None:
            inf = work.infoset[n]
            key, labels = work.inf_keys[inf], work.inf_labels[inf]
            pi = np.array([s.probs_at(key, labels) for s in plans])
            num[key] = num.get(key, 0.0) + w @ pi
            stack.extend((c, plans, w * pi[:, work.action_index[c]]) for c in kids[n])
        else:
            stack.extend((c, plans, w) for c in kids[n])
    out = TabularStrategy(Player.P1, name="abd_root")
    for k in work.infosets_of(Player.P1):
        key, labels = work.inf_keys[k], work.inf_labels[k]
        if key in avg.table:
            out.set(key, labels, avg.table[key][1])
        elif key in num and num[key].sum() > 0:
            out.set(key, labels, num[key] / num[key].sum())
        else:
            out.set(key, labels, np.full(len(labels), 1.0 / len(labels)))
    return out


def test_c6_full_pure_portfolios(bs22):
    ca = scripted_opponent(bs22, "corner_avoider")
    lines, ok = [], True
    pf1 = pf2 = None
    for p in (0.0, 0.5, 1.0):
        rnr = restricted_nash_response(bs22, RobustSpec(p, ca), CfrConfig(iterations=5000))
        agent = ABDAgent(bs22, AgentConfig(p=p, depth=2, p1_portfolio=lambda k: None, p2_portfolio=lambda k: None,
                                           fixed_opponent=ca, cfr=resolve_cfr(3000)))
        if pf1 is None:
            pf1, pf2 = _lazy_pure(agent.work, Player.P1), _lazy_pure(agent.work, Player.P2)
        agent.cfg = AgentConfig(p=p, depth=2, p1_portfolio=pf1, p2_portfolio=pf2, fixed_opponent=ca,
                                cfr=resolve_cfr(3000))
        s = _root_resolve_strategy(agent)
        g, e = gain(agent.work, s, ca), exploitability(agent.work, s)
        good = abs(g - rnr.gain) <= 0.01 and abs(e - rnr.exploitability) <= 0.01
        ok &= good
        obj = p * (g - rnr.gain) - (1 - p) * (e - rnr.exploitability)
        lines.append(f"p={p:g} ABD ({g:.4f}, {e:.4f}) RNR ({rnr.gain:.4f}, {rnr.exploitability:.4f})"
                     + ("" if good else f" objective diff {obj:+.4f}"))
    record(6, ok, "; ".join(lines))
    assert ok


SMALL_GAMES = {
    "kuhn": build_kuhn,
    "bs21": lambda: build_battleships(BattleshipsConfig(2, 1)),
    "lines": LinesToy,
    "pennies": MatchingPennies,
}


def test_c7_solver_soundness(bs22):
    kuhn = build_kuhn()
    rep = cfr_solve(kuhn, CfrConfig(iterations=10_000))
    s1, s2 = rep.strategies
    eu = brute_eu(kuhn, s1, s2)
    lo, hi = -best_response(kuhn, s1, Player.P2)[1], best_response(kuhn, s2, Player.P1)[1]
    kuhn_ok = rep.nash_conv <= 0.005 and abs(eu - KUHN_VALUE) <= 0.005 and lo - 1e-9 <= KUHN_VALUE <= hi + 1e-9

    checked, worst = 0, 0.0
    for name, make in SMALL_GAMES.items():
        game = make()
        for responder in (Player.P1, Player.P2):
            assert math.prod(len(v) for v in infosets(game, responder).values()) <= 10_000
            other = Player(1 - responder)
            opps = [UniformStrategy(other)] + [scripted_opponent(game, f"random:{i}", player=other) for i in range(5)]
            for opp in opps:
                v = best_response(game, opp, responder)[1]
                worst = max(worst, abs(v - enumerate_best_value(game, opp, responder)))
                checked += 1
    br_ok = worst <= 1e-9

    h = bs22.child(bs22.root(), bs22.legal_actions(bs22.root()).index("place:1,0,1x1"))
    h = bs22.child(h, bs22.legal_actions(h).index("place:0,1,1x1"))
    ca = scripted_opponent(bs22, "corner_avoider")
    pi1 = UniformStrategy(Player.P1)
    exact = exact_value(bs22, h, pi1, ca)
    n = 100
    t = math.sqrt(2 * math.log(2 / 0.01) / n)  # utilities in [-1, 1], delta = 0.01
    inside = sum(abs(sampled_fixed_value(bs22, h, pi1, ca, ValueSource("sampled", n, seed)) - exact) <= t
                 for seed in range(1000))
    hoeffding_ok = inside >= 990

    ok = kuhn_ok and br_ok and hoeffding_ok
    record(7, ok, f"Kuhn NashConv {rep.nash_conv:.2e} value {eu:.5f} bracket [{lo:.5f}, {hi:.5f}]; "
                  f"BR vs enumeration {checked} cases max err {worst:.1e}; "
                  f"Hoeffding t={t:.4f} held in {inside}/1000")
    assert ok


def test_c8_fast_path(bs22):
    kuhn = build_kuhn()
    ca = scripted_opponent(bs22, "corner_avoider")
    a1, a2 = builtin_portfolio(bs22, "avoid4", Player.P1), builtin_portfolio(bs22, "avoid4", Player.P2)
    bad_bs, n_bs = agreement(bs22, lambda: AgentConfig(p=1.0, depth=2, p1_portfolio=a1, p2_portfolio=a2,
                                                       fixed_opponent=ca), episodes=100)
    opp = scripted_opponent(kuhn, "random:3")
    frontier = cut_frontier(kuhn, [kuhn.root()], DepthSpec(1))
    k1, k2 = pure_portfolio_by_key(kuhn, frontier, Player.P1), pure_portfolio_by_key(kuhn, frontier, Player.P2)
    bad_k, n_k = agreement(kuhn, lambda: AgentConfig(p=1.0, depth=1, p1_portfolio=k1, p2_portfolio=k2,
                                                     fixed_opponent=opp), episodes=100)
    agent = ABDAgent(bs22, AgentConfig(p=1.0, depth=2, p1_portfolio=a1, p2_portfolio=a2, fixed_opponent=ca))
    agent.act(bs22.root(), fast=True)
    visits_ok = 0 < agent.last_visits <= agent.last_tree_size
    ok = bad_bs == 0 and bad_k == 0 and visits_ok
    record(8, ok, f"disagreements bs22 {bad_bs}/{n_bs}, Kuhn {bad_k}/{n_k}; "
                  f"root visits {agent.last_visits} of {agent.last_tree_size} nodes")
    assert ok


REDUCED = {
    "table1": "",
    "pareto_battleships": "p_grid = 0.6,1.0\niterations = 100\nrnr_iterations = 200\n",
    "pareto_leduc": "p_grid = 1.0\nopponent = s1\nsamples = 2\niterations = 50\nrnr_iterations = 100\n",
    "table2": "random_opponents = 3\nsamples = 2\niterations = 50\n",
    "table3": "trials = 3\nsample_levels = 1,2\n",
    "large_game": "samples = 2\n",
}


def _snapshot(out):
    """Experiment outputs with the wall-clock column blanked."""
    files = {}
    for path in sorted(out.rglob("*")):
        if not path.is_file():
            continue
        if path.suffix == ".csv":
            rows = list(csv.reader(path.open()))
            if "seconds" in rows[0]:
                i = rows[0].index("seconds")
                for r in rows[1:]:
                    r[i] = "-"
            files[path.relative_to(out).as_posix()] = rows
        else:
            files[path.relative_to(out).as_posix()] = path.read_bytes()
    return files


def test_c9_determinism(tmp_path):
    differing = []
    for exp_id, text in REDUCED.items():
        snaps = []
        for run in ("a", "b"):
            spec = ExperimentSpec(exp_id, parse_config_text(text), tmp_path / run / exp_id, seed=7)
            run_experiment(spec)
            snaps.append(_snapshot(spec.out_dir))
        if snaps[0] != snaps[1] or not snaps[0]:
            differing.append(exp_id)
    ok = not differing
    record(9, ok, f"{len(REDUCED)} experiments rerun (seconds column masked); differing: {differing or 'none'}")
    assert ok
