"""Adapting beyond the depth limit: online restricted Nash responses via
depth-limited re-solving with matrix-valued states."""

from .efg import (
    Game,
    GameError,
    MissingInfosetError,
    NodeCapExceeded,
    Player,
    PolicyStrategy,
    Portfolio,
    ReachTriple,
    Strategy,
    TabularStrategy,
    UniformStrategy,
    enumerate_infosets,
    expected_utility,
    reach,
    uniform_strategy,
)

__version__ = "0.1.0"
