"""Counter-based random numbers.

Every random draw in the package is a pure function of a 64-bit stream key
and a draw counter, so results never depend on evaluation order or on how
work is split between workers.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def stable_hash(*parts) -> int:
    """64-bit hash of ints, strings, bytes and tuples thereof; stable across runs."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode() if not isinstance(part, bytes) else part)
        h.update(b"\x1e")
    return int.from_bytes(h.digest(), "little")


def stream_key(seed: int, *parts: int) -> int:
    """Fold a seed and integer coordinates into one stream key."""
    key = splitmix64(seed & MASK64)
    for p in parts:
        key = splitmix64(key ^ (p & MASK64))
    return key


def derive_seed(master: int, *path: int) -> int:
    """Per-trial seed from a master seed; trial i never depends on trial i+1."""
    return stream_key(master, *path) >> 1


class CounterRNG:
    """Scalar generator over a fixed stream key."""

    __slots__ = ("key", "counter")

    def __init__(self, key: int):
        self.key = key & MASK64
        self.counter = 0

    def random(self) -> float:
        self.counter += 1
        return (splitmix64(self.key ^ ((self.counter * GOLDEN) & MASK64)) >> 11) * 2.0**-53

    def choice(self, probs) -> int:
        u = self.random()
        acc = 0.0
        last = 0
        for i, p in enumerate(probs):
            if p <= 0.0:
                continue
            last = i
            acc += p
            if u < acc:
                return i
        return last


def uniforms(key: int, n: int, offset: int = 0) -> np.ndarray:
    """Vectorised draws ``offset+1 .. offset+n`` of the stream ``key``."""
    with np.errstate(over="ignore"):
        c = np.arange(offset + 1, offset + n + 1, dtype=np.uint64) * np.uint64(GOLDEN)
        x = np.uint64(key) ^ c
        x = x + np.uint64(GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return (x >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _splitmix_np(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x + np.uint64(GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def stream_keys(seed: int, hashes: np.ndarray, index: int) -> np.ndarray:
    """Vectorised ``stream_key(seed, h, index)`` over an array of hashes."""
    base = np.uint64(splitmix64(seed & MASK64))
    x = _splitmix_np(np.asarray(hashes, dtype=np.uint64) ^ base)
    return _splitmix_np(x ^ np.uint64(index & MASK64))
