import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abdsolve import Player, PolicyStrategy, UniformStrategy, expected_utility
from abdsolve.games import BattleshipsConfig, LinesToy, MatchingPennies, build_battleships, build_kuhn, scripted_opponent
from abdsolve.solver import CfrConfig, best_response, cfr_solve, exploitability, gain, game_value

from conftest import KUHN_VALUE
from oracles import brute_eu, enumerate_best_value

SMALL_GAMES = {
    "kuhn": build_kuhn,
    "bs21": lambda: build_battleships(BattleshipsConfig(2, 1)),
    "lines": LinesToy,
    "pennies": MatchingPennies,
}


def test_matching_pennies():
    rep = cfr_solve(MatchingPennies(), CfrConfig(iterations=1000))
    for s in rep.strategies:
        (labels, probs), = s.table.values()
        assert np.allclose(probs, 0.5, atol=0.01)


def test_kuhn_cfr_plus():
    rep = cfr_solve(build_kuhn(), CfrConfig(iterations=10_000))
    assert rep.nash_conv <= 0.005
    assert rep.value == pytest.approx(KUHN_VALUE, abs=0.005)
    # the value bracket certified by best responses
    g = build_kuhn()
    lo = -best_response(g, rep.strategies[0], Player.P2)[1]
    hi = best_response(g, rep.strategies[1], Player.P1)[1]
    assert lo - 1e-9 <= KUHN_VALUE <= hi + 1e-9


@pytest.mark.parametrize("variant,averaging", [("vanilla", "uniform"), ("plus", "linear"), ("predictive", "quadratic")])
def test_variants_converge(variant, averaging):
    rep = cfr_solve(build_kuhn(), CfrConfig(iterations=3000, variant=variant, averaging=averaging))
    assert rep.nash_conv < 0.02
    assert all(e >= -1e-6 for e in rep.exploitability)


def test_exploitability_monotone_in_iterations():
    convs = [cfr_solve(build_kuhn(), CfrConfig(iterations=n)).nash_conv for n in (100, 1000, 10_000)]
    assert convs[0] + 1e-3 >= convs[1] and convs[1] + 1e-3 >= convs[2]


def test_cfr_deterministic():
    a = cfr_solve(build_kuhn(), CfrConfig(iterations=500))
    b = cfr_solve(build_kuhn(), CfrConfig(iterations=500))
    assert np.array_equal(a.average, b.average)


def test_cfr_config_validation():
    with pytest.raises(ValueError):
        CfrConfig(iterations=0)
    with pytest.raises(ValueError):
        CfrConfig(variant="mc")
    with pytest.raises(ValueError):
        CfrConfig(averaging="quadratic")


def test_bs22_value(bs22):
    rep = cfr_solve(bs22, CfrConfig(iterations=2000))
    assert rep.value == pytest.approx(0.25, abs=0.005)
    assert game_value(bs22) == pytest.approx(0.25, abs=0.005)


def test_best_response_corner_avoider(bs22):
    s, v = best_response(bs22, scripted_opponent(bs22, "corner_avoider"), Player.P1)
    assert v == pytest.approx(1.0)
    labels, probs = s.table[bs22.infoset_key(bs22.root(), Player.P1)]
    assert labels[int(np.argmax(probs))] == "place:0,0,1x1"
    assert gain(bs22, s, scripted_opponent(bs22, "corner_avoider")) == pytest.approx(0.75, abs=0.005)


def test_best_response_vs_uniform_kuhn(kuhn):
    # frozen from exhaustive enumeration of all 64 pure P1 strategies
    assert best_response(kuhn, UniformStrategy(Player.P2), Player.P1)[1] == pytest.approx(0.5, abs=1e-9)
    assert enumerate_best_value(kuhn, UniformStrategy(Player.P2), Player.P1) == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(SMALL_GAMES)), st.sampled_from([Player.P1, Player.P2]), st.integers(0, 10_000))
def test_best_response_matches_enumeration(name, responder, seed):
    game = SMALL_GAMES[name]()
    opp = scripted_opponent(game, f"random:{seed}", player=Player(1 - responder))
    s, v = best_response(game, opp, responder)
    assert v == pytest.approx(enumerate_best_value(game, opp, responder), abs=1e-9)
    # the returned strategy is pure and achieves the value
    assert all(np.count_nonzero(p) == 1 for _, p in s.table.values())
    u = brute_eu(game, s, opp) if responder == Player.P1 else -brute_eu(game, opp, s)
    assert u == pytest.approx(v, abs=1e-9)


def test_best_response_tie_break_lowest_index():
    s, v = best_response(MatchingPennies(), UniformStrategy(Player.P2), Player.P1)
    (labels, probs), = s.table.values()
    assert v == 0.0 and probs.tolist() == [1.0, 0.0]


def test_exploitability_and_gain(bs22):
    rep = cfr_solve(bs22, CfrConfig(iterations=3000))
    assert exploitability(bs22, rep.strategies[0]) <= 0.01
    assert gain(bs22, rep.strategies[0], rep.strategies[1]) == pytest.approx(0.0, abs=0.01)

    class TopLeftUniform:
        player = Player.P1

        def probs(self, game, h):
            labels = game.legal_actions(h)
            if labels[0].startswith("place:"):
                return np.array([1.0 if a == "place:0,0,1x1" else 0.0 for a in labels])
            return np.full(len(labels), 1.0 / len(labels))

        def probs_at(self, key, labels):
            if labels[0].startswith("place:"):
                return np.array([1.0 if a == "place:0,0,1x1" else 0.0 for a in labels])
            return np.full(len(labels), 1.0 / len(labels))

        def covers(self, key):
            return True

    # P2 answers by shooting top-left first; P1 only wins by hitting on its first shot (1/4),
    # so P2 earns 0.5 against a value of -0.25
    e_tl = exploitability(bs22, TopLeftUniform())
    assert e_tl == pytest.approx(0.75, abs=1e-3)


def test_leduc_uniform_exploitability(leduc):
    e = exploitability(leduc, UniformStrategy(Player.P1))
    assert e > 0
    assert e == pytest.approx(2.5739315, abs=1e-4)


def test_gain_tight_passive_vs_s1(leduc):
    from abdsolve.games.opponents import tight_passive

    tp = PolicyStrategy(Player.P1, tight_passive, "tp")
    s1 = scripted_opponent(leduc, "s1")
    # both check round one, P1 folds to S1's round-two bet: always -1
    assert expected_utility(leduc, tp, s1) == pytest.approx(-1.0)
    assert gain(leduc, tp, s1) == pytest.approx(-1.0 - game_value(leduc), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_best_response_maximises_gain(seed):
    game = build_battleships()
    m = scripted_opponent(game, f"random:{seed}")
    s, _ = best_response(game, m, Player.P1)
    other = scripted_opponent(game, f"random:{seed + 1}", player=Player.P1)
    v = game_value(game)
    assert gain(game, s, m, v) >= gain(game, other, m, v) - 1e-12
    assert gain(game, UniformStrategy(Player.P1), m, v) <= gain(game, s, m, v) + 1e-12
