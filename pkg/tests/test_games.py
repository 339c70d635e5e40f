import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abdsolve import GameError, Player, UniformStrategy, enumerate_infosets, expected_utility
from abdsolve.efg import iter_histories, tabulate
from abdsolve.games import (
    BattleshipsConfig, LeducConfig, OpponentId, build_battleships, builtin_portfolio, scripted_opponent,
    ship_placements,
)
from abdsolve.games.leduc import leduc_round

from oracles import brute_eu

U1, U2 = UniformStrategy(Player.P1), UniformStrategy(Player.P2)


def _walk(game, labels):
    h = game.root()
    for a in labels:
        h = game.child(h, game.legal_actions(h).index(a))
    return h


def _first_shot_state(game):
    """P2's first shot on a fresh 2x2 board."""
    h = _walk(game, ["place:0,0,1x1", "place:1,1,1x1", "shoot:0,1"])
    assert game.role(h) == Player.P2
    return h


def test_battleships_root(bs22):
    assert len(bs22.legal_actions(bs22.root())) == 4
    assert bs22.role(bs22.root()) == Player.P1


def test_placements_3x3_2x1():
    # 6 horizontal + 6 vertical
    assert len(ship_placements(BattleshipsConfig(3, 3, ((2, 1),)), (2, 1))) == 12


def test_config_errors():
    with pytest.raises(GameError):
        BattleshipsConfig(2, 2, ((3, 1),))
    with pytest.raises(GameError):
        BattleshipsConfig(10, 10)
    with pytest.raises(GameError):
        build_battleships(BattleshipsConfig(2, 2, ((2, 2), (1, 1))))
    with pytest.raises(GameError):
        LeducConfig(ranks=4)


def test_shooter_swap_negates_uniform_value():
    a = build_battleships(BattleshipsConfig(first_shooter=Player.P1))
    b = build_battleships(BattleshipsConfig(first_shooter=Player.P2))
    assert brute_eu(a, U1, U2) == pytest.approx(-brute_eu(b, U1, U2), abs=1e-12)


def test_corner_avoider_distributions(bs22):
    ca = scripted_opponent(bs22, "corner_avoider")
    h = _walk(bs22, ["place:0,0,1x1", "place:1,1,1x1", "shoot:0,1"])
    assert bs22.legal_actions(h)[0] == "shoot:0,0"
    assert np.allclose(ca.probs(bs22, h), [0, 1 / 3, 1 / 3, 1 / 3])
    # only the top-left cell left for P2
    h = _walk(bs22, ["place:0,0,1x1", "place:1,1,1x1", "shoot:0,1", "shoot:1,0", "shoot:1,0",
                     "shoot:0,1"])
    assert bs22.role(h) == Player.P1
    h = bs22.child(h, bs22.legal_actions(h).index("shoot:0,0"))
    assert bs22.role(h) == Player.P2
    assert bs22.legal_actions(h) == ("shoot:0,0", "shoot:1,1")
    h = _walk(bs22, ["place:0,0,1x1", "place:1,1,1x1", "shoot:0,0", "shoot:1,0", "shoot:1,0", "shoot:0,1",
                     "shoot:0,1", "shoot:1,1"])


def test_noisy_corner_avoider(bs22):
    h = _first_shot_state(bs22)
    probs = scripted_opponent(bs22, "noisy:0.05").probs(bs22, h)
    assert probs[0] == pytest.approx(0.05)
    assert np.allclose(probs[1:], 0.95 / 3)


def test_corner_avoider_loses_to_top_left(bs22):
    from abdsolve.solver import best_response

    ca = scripted_opponent(bs22, "corner_avoider")

    class TopLeft:
        player = Player.P1

        def probs(self, game, h):
            labels = game.legal_actions(h)
            if labels[0].startswith("place:"):
                return np.array([1.0 if a == "place:0,0,1x1" else 0.0 for a in labels])
            return np.full(len(labels), 1.0 / len(labels))

    assert brute_eu(bs22, TopLeft(), ca) == pytest.approx(1.0)
    assert best_response(bs22, ca, Player.P1)[1] == pytest.approx(1.0)


def test_avoid4_and_parity(bs22):
    pf = builtin_portfolio(bs22, "avoid4", Player.P2)
    assert pf.names == ["avoid0", "avoid1", "avoid2", "avoid3"]
    h = _first_shot_state(bs22)
    assert np.allclose(pf.strategies[0].probs(bs22, h), [0, 1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(pf.strategies[3].probs(bs22, h), [1 / 3, 1 / 3, 1 / 3, 0])
    big = build_battleships(BattleshipsConfig(5, 5, ((2, 2),)))
    even = builtin_portfolio(big, "parity3", Player.P1).strategies[1]
    labels = tuple(f"shoot:{c % 5},{c // 5}" for c in range(25))
    probs = even.probs_at(b"fresh", labels)
    assert np.count_nonzero(probs) == 13
    assert np.allclose(probs[probs > 0], 1 / 13)
    with pytest.raises(GameError, match="available"):
        builtin_portfolio(bs22, "nope")
    with pytest.raises(GameError):
        builtin_portfolio(big, "avoid4")


def test_leduc_rules(leduc):
    for h in iter_histories(leduc):
        if leduc.role(h) in (Player.P1, Player.P2):
            labels = leduc.legal_actions(h)
            assert ("fold" in labels) == ("call" in labels)
    h = _walk(leduc, ["deal:Js", "deal:Jh", "check", "check", "deal:Qs", "check", "check"])
    assert leduc.is_terminal(h)
    assert leduc.utility(h) == 0.0
    # pair with the board beats a higher card
    h = _walk(leduc, ["deal:Js", "deal:Kh", "bet", "call", "deal:Jh", "check", "check"])
    assert leduc.utility(h) == 3.0
    # bet sizes 2 and 4, at most two raises per round
    h = _walk(leduc, ["deal:Js", "deal:Kh", "bet", "raise"])
    assert leduc.legal_actions(h) == ("fold", "call")
    h = _walk(leduc, ["deal:Js", "deal:Kh", "check", "check", "deal:Qs", "bet", "raise", "call"])
    assert leduc.utility(h) == -9.0


def test_leduc_scripted(leduc):
    s1 = scripted_opponent(leduc, "s1")
    s3 = scripted_opponent(leduc, "s3")
    facing = _walk(leduc, ["deal:Js", "deal:Kh", "bet"])
    assert leduc.role(facing) == Player.P2
    assert np.allclose(s1.probs(leduc, facing), [1, 0, 0])
    r2 = _walk(leduc, ["deal:Js", "deal:Kh", "check", "check", "deal:Qs", "check"])
    assert leduc_round(leduc.infoset_key(r2, Player.P2)) == 2
    assert np.allclose(s1.probs(leduc, r2), [0, 1])
    cap = _walk(leduc, ["deal:Js", "deal:Kh", "check", "check", "deal:Qs", "check", "bet", "raise"])
    assert leduc.role(cap) == Player.P2
    assert np.allclose(s1.probs(leduc, cap), [0, 1])
    assert np.allclose(s3.probs(leduc, cap), [1, 0])
    s2 = scripted_opponent(leduc, "s2")
    assert np.allclose(s2.probs(leduc, facing), [0, 0, 1])
    tp = builtin_portfolio(leduc, "leduc2", Player.P1).strategies[0]
    facing1 = _walk(leduc, ["deal:Js", "deal:Kh", "check", "bet"])
    assert np.allclose(tp.probs(leduc, facing1), [1, 0, 0])


def test_inapplicable_opponents(bs22, leduc):
    with pytest.raises(GameError):
        scripted_opponent(bs22, "s1")
    with pytest.raises(GameError):
        scripted_opponent(leduc, "corner_avoider")
    with pytest.raises(GameError):
        OpponentId.parse("bogus")


@pytest.mark.parametrize("game_name,opp", [
    ("bs22", "corner_avoider"), ("bs22", "noisy:0.05"), ("bs22", "uniform"), ("bs22", "random:3"),
    ("leduc", "s1"), ("leduc", "s2"), ("leduc", "s3"), ("leduc", "s4"), ("leduc", "random:7"),
])
def test_scripted_strategies_valid(game_name, opp, request):
    game = request.getfixturevalue(game_name)
    s = tabulate(game, scripted_opponent(game, opp))
    assert len(s) == len(enumerate_infosets(game, Player.P2))
    for labels, probs in s.table.values():
        assert np.all(probs >= 0) and probs.sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_random_opponent_deterministic(seed):
    from abdsolve.harness.io import format_strategy
    from abdsolve.games import build_kuhn

    k = build_kuhn()
    a = format_strategy(tabulate(k, scripted_opponent(k, f"random:{seed}")), "kuhn")
    b = format_strategy(tabulate(k, scripted_opponent(k, f"random:{seed}")), "kuhn")
    assert a == b
    c = format_strategy(tabulate(k, scripted_opponent(k, f"random:{seed + 1}")), "kuhn")
    assert a != c


def test_leduc_game_value(leduc):
    from abdsolve.solver import game_value

    from conftest import LEDUC_VALUE
    assert game_value(leduc) == pytest.approx(LEDUC_VALUE, abs=1e-3)


def test_bs22_uniform_via_kernels(bs22):
    assert expected_utility(bs22, U1, U2) == pytest.approx(0.25)
