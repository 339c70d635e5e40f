"""Battleships on small boards.

Each player secretly places its ships (one decision per ship, P1 first),
then the players alternate single shots at the opponent's board.  Hit or
miss is public; the game ends when all cells of one player's fleet are hit
and the sinking shooter receives +1.

Cells are indexed ``y * width + x``; cell 0 is the top-left corner.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..efg import GameError, ImplicitGame, Player

MAX_CELLS = 49


@dataclass(frozen=True)
class BattleshipsConfig:
    width: int = 2
    height: int = 2
    ships: tuple[tuple[int, int], ...] = ((1, 1),)
    first_shooter: Player = Player.P1
    max_cells: int = MAX_CELLS

    def __post_init__(self):
        object.__setattr__(self, "ships", tuple(tuple(s) for s in self.ships))
        object.__setattr__(self, "first_shooter", Player(self.first_shooter))
        if self.width < 1 or self.height < 1:
            raise GameError("board dimensions must be positive")
        if self.width * self.height > self.max_cells:
            raise GameError(f"board has {self.width * self.height} cells, cap is {self.max_cells}")
        if not self.ships:
            raise GameError("at least one ship is required")
        for w, h in self.ships:
            if not ((w <= self.width and h <= self.height) or (h <= self.width and w <= self.height)):
                raise GameError(f"ship {w}x{h} does not fit on a {self.width}x{self.height} board")
        if self.first_shooter not in (Player.P1, Player.P2):
            raise GameError("first_shooter must be P1 or P2")

    @property
    def cells(self) -> int:
        return self.width * self.height

    @property
    def label(self) -> str:
        ships = ",".join(f"{w}x{h}" for w, h in self.ships)
        return f"battleships_{self.width}x{self.height}_{ships}_{'p1' if self.first_shooter == Player.P1 else 'p2'}"


@dataclass(frozen=True)
class Placement:
    x: int
    y: int
    w: int
    h: int
    mask: int

    @property
    def label(self) -> str:
        return f"place:{self.x},{self.y},{self.w}x{self.h}"


def ship_placements(cfg: BattleshipsConfig, shape: tuple[int, int]) -> list[Placement]:
    """Both orientations, deduplicated, ordered by top-left cell then orientation."""
    out: dict[int, Placement] = {}
    w0, h0 = shape
    for w, h in ((w0, h0), (h0, w0)):
        for y in range(cfg.height - h + 1):
            for x in range(cfg.width - w + 1):
                mask = 0
                for dy in range(h):
                    for dx in range(w):
                        mask |= 1 << ((y + dy) * cfg.width + x + dx)
                out.setdefault(mask, Placement(x, y, w, h, mask))
    return sorted(out.values(), key=lambda p: (p.y * cfg.width + p.x, p.w < p.h))


def cell_label(cfg: BattleshipsConfig, c: int) -> str:
    return f"shoot:{c % cfg.width},{c // cfg.width}"


def parse_shot(label: str) -> tuple[int, int]:
    x, y = label[6:].split(",")
    return int(x), int(y)


@dataclass(frozen=True)
class BoardState:
    """Payload: fleets as bit masks, shots taken, whose turn to shoot."""

    placed: tuple[int, int] = (0, 0)  # ships placed so far per player
    fleet: tuple[int, int] = (0, 0)
    shots: tuple[int, int] = (0, 0)  # shots[i]: cells player i has shot on the opponent board
    turn: int = 0
    winner: int = -1


class Battleships(ImplicitGame):
    def __init__(self, cfg: BattleshipsConfig):
        self.cfg = cfg
        self.game_id = cfg.label
        self.placements = [ship_placements(cfg, s) for s in cfg.ships]
        self.full = (1 << cfg.cells) - 1
        if not _fleet_exists(self.placements, 0, 0):
            raise GameError("no non-overlapping placement of the fleet exists")
        self._labels = [cell_label(cfg, c) for c in range(cfg.cells)]

    @property
    def num_ships(self) -> int:
        return len(self.cfg.ships)

    def _initial(self):
        return BoardState(turn=int(self.cfg.first_shooter))

    def _role(self, s: BoardState):
        if s.winner >= 0:
            return Player.TERMINAL
        n = self.num_ships
        if s.placed[0] < n:
            return Player.P1
        if s.placed[1] < n:
            return Player.P2
        return Player(s.turn)

    def _legal_placements(self, s: BoardState, player: int) -> list[Placement]:
        k = s.placed[player]
        occ = s.fleet[player]
        rest = self.placements[k + 1:]
        return [p for p in self.placements[k] if not p.mask & occ and _fleet_exists(rest, occ | p.mask, 0)]

    def _actions(self, s: BoardState):
        role = self._role(s)
        if s.placed[int(role)] < self.num_ships:
            return tuple(p.label for p in self._legal_placements(s, int(role)))
        shot = s.shots[int(role)]
        return tuple(self._labels[c] for c in range(self.cfg.cells) if not shot >> c & 1)

    def _next(self, s: BoardState, i: int):
        role = int(self._role(s))
        if s.placed[role] < self.num_ships:
            p = self._legal_placements(s, role)[i]
            placed = list(s.placed)
            fleet = list(s.fleet)
            placed[role] += 1
            fleet[role] |= p.mask
            tag = f"P{role + 1}place"
            own = f"{tag}:{p.label}"
            toks = (own, tag, tag) if role == 0 else (tag, own, tag)
            return BoardState(tuple(placed), tuple(fleet), s.shots, s.turn, -1), toks
        shot = s.shots[role]
        free = [c for c in range(self.cfg.cells) if not shot >> c & 1]
        c = free[i]
        shots = list(s.shots)
        shots[role] |= 1 << c
        target = s.fleet[1 - role]
        hit = bool(target >> c & 1)
        winner = role if hit and (target & ~shots[role]) == 0 else -1
        tok = f"s{role + 1}:{c % self.cfg.width},{c // self.cfg.width}:{'hit' if hit else 'miss'}"
        return BoardState(s.placed, s.fleet, tuple(shots), 1 - role, winner), (tok, tok, tok)

    def _utility(self, s: BoardState):
        return 1.0 if s.winner == 0 else -1.0

    def _chance_probs(self, s):
        raise GameError("Battleships has no chance nodes")


def _fleet_exists(placements: list[list[Placement]], occ: int, k: int) -> bool:
    if k == len(placements):
        return True
    return any(not p.mask & occ and _fleet_exists(placements, occ | p.mask, k + 1) for p in placements[k])


def build_battleships(cfg: BattleshipsConfig | None = None, **kw) -> Battleships:
    return Battleships(cfg or BattleshipsConfig(**kw))
