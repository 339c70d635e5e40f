"""Vectorised Battleships rollouts for shooters that ignore hit feedback.

Such a shooter's order of shots is independent of the opponent, so each
side's sink time can be sampled separately: the side to move next wins iff
its sink time is at most the other's.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .._kernels import draw

UNIFORM, AVOID, NOISY, PARITY = 0, 1, 2, 3
KIND_CODES = {"uniform": UNIFORM, "avoid": AVOID, "noisy": NOISY, "parity": PARITY}


@njit(cache=True)
def _shuffle(cells, m, key, counter):
    for i in range(m - 1, 0, -1):
        counter += 1
        j = int(draw(key, counter) * (i + 1))
        if j > i:
            j = i
        t = cells[i]
        cells[i] = cells[j]
        cells[j] = t
    return counter


@njit(cache=True)
def sink_time(fleet, shot, ncells, width, kind, arg, key, counter, buf):
    """Shots needed to hit every unshot fleet cell; returns (time, counter)."""
    m = 0
    for c in range(ncells):
        if not (shot >> c) & 1:
            buf[m] = c
            m += 1
    if kind == UNIFORM:
        counter = _shuffle(buf, m, key, counter)
    elif kind == AVOID or kind == NOISY:
        k = int(arg) if kind == AVOID else 0
        pos = -1
        for i in range(m):
            if buf[i] == k:
                pos = i
        if pos >= 0:
            buf[pos] = buf[m - 1]
            buf[m - 1] = k
            counter = _shuffle(buf, m - 1, key, counter)
            if kind == NOISY and arg > 0.0:
                # the avoided cell is taken at the first success of a
                # per-shot eps coin, or last when nothing else is left
                at = m - 1
                for step in range(m - 1):
                    counter += 1
                    if draw(key, counter) < arg:
                        at = step
                        break
                for i in range(m - 1, at, -1):
                    buf[i] = buf[i - 1]
                buf[at] = k
        else:
            counter = _shuffle(buf, m, key, counter)
    else:
        par = int(arg)
        a = 0
        for i in range(m):
            c = buf[i]
            if ((c % width) + (c // width)) % 2 == par:
                t = buf[a]
                buf[a] = c
                buf[i] = t
                a += 1
        counter = _shuffle(buf[:a], a, key, counter)
        counter = _shuffle(buf[a:], m - a, key, counter)
    last = 0
    for i in range(m):
        if (fleet >> buf[i]) & 1:
            last = i + 1
    return last, counter


@njit(cache=True)
def rollout_values(fleet1, fleet2, shots1, shots2, turn, ncells, width,
                   kind1, arg1, kind2, arg2, keys, n_samples):
    """Mean P1 utility per leaf; leaf ``j`` uses stream ``keys[j]``."""
    out = np.empty(keys.shape[0])
    buf = np.empty(ncells, dtype=np.int64)
    for j in range(keys.shape[0]):
        counter = 0
        total = 0.0
        for _ in range(n_samples):
            t1, counter = sink_time(fleet2[j], shots1[j], ncells, width, kind1, arg1, keys[j], counter, buf)
            t2, counter = sink_time(fleet1[j], shots2[j], ncells, width, kind2, arg2, keys[j], counter, buf)
            if turn[j] == 0:
                win = t1 <= t2
            else:
                win = t1 < t2
            total += 1.0 if win else -1.0
        out[j] = total / n_samples
    return out
