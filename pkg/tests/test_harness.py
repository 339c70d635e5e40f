import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abdsolve import GameError, Player, TabularStrategy
from abdsolve.games import build_kuhn
from abdsolve.harness.cli import main
from abdsolve.harness.config import ConfigError, ExperimentSpec, RunConfig, build_game, build_opponent, parse_config_text
from abdsolve.harness.experiments import run_experiment, run_table1
from abdsolve.harness.io import csv_text, emit_csv, format_strategy, load_strategy, parse_strategy, save_strategy
from abdsolve.solver import CfrConfig, cfr_solve


@pytest.fixture(scope="module")
def kuhn_ne():
    return cfr_solve(build_kuhn(), CfrConfig(iterations=500)).strategies


def test_strategy_round_trip(tmp_path, kuhn_ne):
    s = kuhn_ne[0]
    path = tmp_path / "s.txt"
    save_strategy(s, path, "kuhn")
    text = path.read_text()
    assert text.startswith("#strategy v1 game=kuhn player=1\n")
    back, gid = load_strategy(path)
    assert gid == "kuhn" and back.player == Player.P1
    save_strategy(back, tmp_path / "t.txt", "kuhn")
    assert (tmp_path / "t.txt").read_bytes() == path.read_bytes()
    line = text.splitlines()[1]
    key_hex, body = line.split("\t")
    assert bytes.fromhex(key_hex) == min(s.table)
    assert all(len(x.split("=")) == 2 for x in body.split(","))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.binary(min_size=1, max_size=6), st.integers(1, 4), st.integers(0, 10**6)),
                min_size=1, max_size=8, unique_by=lambda t: t[0]))
def test_round_trip_property(entries):
    s = TabularStrategy(Player.P2)
    for key, n, seed in entries:
        p = np.random.default_rng(seed).random(n) + 1e-3
        s.set(key, [f"a{i},x" for i in range(n)], p / p.sum())
    text = format_strategy(s, "g")
    back, _ = parse_strategy(text)
    assert format_strategy(back, "g") == text
    for key in s.table:
        assert back.table[key][0] == s.table[key][0]
        assert np.allclose(back.table[key][1], s.table[key][1], atol=1e-11)


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("#strategy v1 game=g\n", 1),
    ("#strategy v1 game=g player=1\nzz\ta=1\n", 2),
    ("#strategy v1 game=g player=1\n01 a=1\n", 2),
    ("#strategy v1 game=g player=1\n01\ta=0.5,b=0.4\n", 2),
    ("#strategy v1 game=g player=1\n02\ta=1\n01\ta=1\n", 3),
    ("#strategy v1 game=g player=1\n01\ta=x\n", 2),
])
def test_malformed_strategy_files(text, line):
    with pytest.raises(GameError, match=f"line {line}"):
        parse_strategy(text)


def test_config_parsing():
    cfg = parse_config_text("game = battleships\nwidth = 4\nheight=4\nships = 2x1\n# note\np = 0.5  # trust\n")
    assert cfg.get("ships") == ((2, 1),) and cfg.get("p") == 0.5
    game = build_game(cfg)
    assert game.cfg.cells == 16


@pytest.mark.parametrize("text,line,match", [
    ("p = 1.5", 1, r"p must lie in \[0, 1\]"),
    ("game = leduc\ncolour = red", 2, "unknown key"),
    ("width 4", 1, "key = value"),
    ("game = chess", 1, "one of"),
    ("depth = 0", 1, ">= 1"),
    ("ships = 2by1", 1, "WxH"),
])
def test_config_errors(text, line, match):
    with pytest.raises(ConfigError, match=match) as e:
        parse_config_text(text)
    assert e.value.line == line


def test_build_opponent_from_file(tmp_path, bs22):
    from abdsolve.efg import tabulate
    from abdsolve.games import scripted_opponent

    ca = tabulate(bs22, scripted_opponent(bs22, "corner_avoider"))
    save_strategy(ca, tmp_path / "ca.txt", bs22.game_id)
    loaded = build_opponent(bs22, f"file:{tmp_path / 'ca.txt'}")
    assert loaded.table.keys() == ca.table.keys()
    with pytest.raises(ConfigError):
        build_opponent(bs22, f"file:{tmp_path / 'ca.txt'}", Player.P1)
    with pytest.raises(ConfigError):
        ExperimentSpec("table9", RunConfig(), tmp_path)


def test_csv_format(tmp_path):
    assert csv_text(["a", "b"], [("x", 0.5), ("y", 2)]) == "a,b\nx,0.500000\ny,2\n"
    emit_csv(["a"], [(1.0,)], tmp_path / "sub" / "o.csv")
    assert (tmp_path / "sub" / "o.csv").read_text() == "a\n1.000000\n"


def test_table1(tmp_path):
    res = run_experiment(ExperimentSpec("table1", RunConfig(), tmp_path, seed=0))
    rows = list(csv.reader((tmp_path / "table1.csv").open()))
    assert rows[0] == ["method", "depth", "value", "seconds"]
    assert len(rows) == 9
    cdbr = [float(r[2]) for r in rows[1:5]]
    abd = [float(r[2]) for r in rows[5:9]]
    assert cdbr == pytest.approx([0.25, 0.25, 1.0, 1.0], abs=0.01)
    assert abd == pytest.approx([1.0] * 4, abs=0.01)
    assert all(float(r[3]) > 0 for r in rows[1:])
    assert len(list((tmp_path / "strategies").glob("*.txt"))) == len(res.strategies) == 8


def test_cli_solve_and_br(tmp_path, capsys):
    assert main(["solve", "--game", "kuhn", "--iterations", "300", "--strategy-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "game,iterations,value,exploitability_p1,exploitability_p2,seconds"
    assert (tmp_path / "p1.txt").exists() and (tmp_path / "p2.txt").exists()
    assert main(["br", "--game", "battleships", "--opponent", "corner_avoider", "--out", str(tmp_path / "br.csv")]) == 0
    row = list(csv.reader((tmp_path / "br.csv").open()))[1]
    assert float(row[1]) == pytest.approx(1.0) and float(row[2]) == pytest.approx(0.75, abs=0.005)


def test_cli_rnr_abd(tmp_path, capsys):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("game = battleships\nopponent = corner_avoider\n")
    assert main(["rnr", "--game", str(cfg), "--p", "0,1", "--iterations", "500"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["p", "gain", "exploitability", "iterations", "seconds"] and len(rows) == 3
    assert main(["abd", "--game", str(cfg), "--p", "1", "--depth", "1", "--exact-ev"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert float(rows[1][rows[0].index("mean")]) == pytest.approx(1.0, abs=1e-6)


def test_cli_errors(tmp_path, capsys):
    assert main(["abd", "--game", "battleships", "--p", "1.5"]) == 2
    assert "p must lie" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("game = battleships\nspeed = 3\n")
    assert main(["solve", "--game", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_exp(tmp_path, capsys):
    assert main(["exp", "--id", "table1", "--seed", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "table1.csv").exists()
    assert capsys.readouterr().out.startswith("method,depth,value,seconds\n")


def test_table3_small(tmp_path):
    cfg = parse_config_text("trials = 5\nsample_levels = 1,3\n")
    res = run_experiment(ExperimentSpec("table3", cfg, tmp_path, seed=1))
    assert res.header == ["samples", "correct_fraction", "trials", "seconds"]
    assert [r[0] for r in res.rows] == [1, 3] and all(r[2] == 5 for r in res.rows)
    assert all(0 <= r[1] <= 1 for r in res.rows)


def test_seed_splitting_is_prefix_stable():
    from abdsolve.rng import derive_seed

    a = [derive_seed(7, 2, j) for j in range(5)]
    b = [derive_seed(7, 2, j) for j in range(10)]
    assert b[:5] == a and len(set(b)) == 10
