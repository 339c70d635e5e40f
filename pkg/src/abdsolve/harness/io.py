"""Strategy files and CSV output."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..efg import GameError, Player, TabularStrategy

HEADER = "#strategy v1 game={game} player={player}"


def format_strategy(strategy: TabularStrategy, game_id: str) -> str:
    lines = [HEADER.format(game=game_id, player=int(strategy.player) + 1)]
    for key in sorted(strategy.table):
        labels, probs = strategy.table[key]
        body = ",".join(f"{a}={float(q):.12g}" for a, q in zip(labels, probs))
        lines.append(f"{key.hex()}\t{body}")
    return "\n".join(lines) + "\n"


def save_strategy(strategy: TabularStrategy, path, game_id: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_strategy(strategy, game_id), encoding="utf-8")


def _parse_entries(body: str, lineno: int) -> tuple[list[str], list[float]]:
    # labels may contain commas but never '='; probabilities contain neither
    parts = body.split("=")
    if len(parts) < 2:
        raise GameError(f"line {lineno}: expected label=prob entries")
    labels = [parts[0]]
    probs = []
    for mid in parts[1:-1]:
        prob, sep, label = mid.partition(",")
        if not sep or not label:
            raise GameError(f"line {lineno}: malformed entry near {mid!r}")
        probs.append(prob)
        labels.append(label)
    probs.append(parts[-1])
    try:
        values = [float(x) for x in probs]
    except ValueError as e:
        raise GameError(f"line {lineno}: bad probability ({e})") from None
    return labels, values


def parse_strategy(text: str) -> tuple[TabularStrategy, str]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#strategy v1 "):
        raise GameError("line 1: missing '#strategy v1' header")
    fields = dict(item.split("=", 1) for item in lines[0].split()[2:] if "=" in item)
    if "game" not in fields or fields.get("player") not in ("1", "2"):
        raise GameError("line 1: header needs game=<id> and player=<1|2>")
    s = TabularStrategy(Player(int(fields["player"]) - 1), name=f"file:{fields['game']}")
    prev = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        hexkey, tab, body = line.partition("\t")
        if not tab:
            raise GameError(f"line {lineno}: expected '<key hex>\\t<entries>'")
        try:
            key = bytes.fromhex(hexkey)
        except ValueError:
            raise GameError(f"line {lineno}: infoset key is not hex") from None
        if prev is not None and key <= prev:
            raise GameError(f"line {lineno}: keys must be strictly increasing")
        prev = key
        labels, probs = _parse_entries(body, lineno)
        p = np.array(probs)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise GameError(f"line {lineno}: probabilities must be nonnegative and sum to 1")
        s.table[key] = (tuple(labels), p)
    return s, fields["game"]


def load_strategy(path) -> tuple[TabularStrategy, str]:
    return parse_strategy(Path(path).read_text(encoding="utf-8"))


def csv_text(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6f}"
    return str(x)


def emit_csv(header: list[str], rows: list, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(csv_text(header, rows), encoding="utf-8")
