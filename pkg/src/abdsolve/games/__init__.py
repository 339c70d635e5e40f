from .battleships import Battleships, BattleshipsConfig, build_battleships, ship_placements
from .kuhn import KuhnPoker, build_kuhn
from .leduc import LeducConfig, LeducPoker, build_leduc, leduc_round
from .opponents import OpponentId, builtin_portfolio, scripted_opponent, shooter
from .toys import LinesToy, MatchingPennies, TerminalGame

__all__ = [
    "Battleships", "BattleshipsConfig", "build_battleships", "ship_placements",
    "KuhnPoker", "build_kuhn", "LeducConfig", "LeducPoker", "build_leduc", "leduc_round",
    "OpponentId", "builtin_portfolio", "scripted_opponent", "shooter",
    "LinesToy", "MatchingPennies", "TerminalGame",
]
