"""Numba kernels over breadth-first trees (see ``abdsolve.tree``).

Conventions: ``roles`` uses 0=P1, 1=P2, 2=chance, 3=terminal; ``slot[n]`` is
the strategy slot of the edge into ``n`` when its parent is a player node;
``chance_prob[n]`` is the probability of the edge into ``n`` when its parent
is a chance node.  Utilities are always P1's.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

CHANCE = 2
TERMINAL = 3
TIE_EPS = 1e-12


@njit(cache=True)
def joint_reach(roles, parent, slot, chance_prob, sig):
    n = roles.shape[0]
    r = np.empty(n)
    r[0] = 1.0
    for i in range(1, n):
        p = parent[i]
        if roles[p] == CHANCE:
            r[i] = r[p] * chance_prob[i]
        else:
            r[i] = r[p] * sig[slot[i]]
    return r


@njit(cache=True)
def reach_split(roles, parent, slot, chance_prob, sig):
    """Per-actor reach: columns P1, P2, chance."""
    n = roles.shape[0]
    r = np.ones((n, 3))
    for i in range(1, n):
        p = parent[i]
        r[i, 0] = r[p, 0]
        r[i, 1] = r[p, 1]
        r[i, 2] = r[p, 2]
        rp = roles[p]
        if rp == CHANCE:
            r[i, 2] *= chance_prob[i]
        else:
            r[i, rp] *= sig[slot[i]]
    return r


@njit(cache=True)
def expected_utility(roles, parent, slot, chance_prob, utilities, sig):
    r = joint_reach(roles, parent, slot, chance_prob, sig)
    total = 0.0
    for i in range(roles.shape[0]):
        if roles[i] == TERMINAL:
            total += r[i] * utilities[i]
    return total


@njit(cache=True)
def node_values(roles, first_child, num_children, slot, chance_prob, utilities, sig):
    """Expected P1 utility of every subtree under the profile ``sig``."""
    n = roles.shape[0]
    v = np.zeros(n)
    for i in range(n - 1, -1, -1):
        if roles[i] == TERMINAL:
            v[i] = utilities[i]
            continue
        acc = 0.0
        lo = first_child[i]
        for c in range(lo, lo + num_children[i]):
            if roles[i] == CHANCE:
                acc += chance_prob[c] * v[c]
            else:
                acc += sig[slot[c]] * v[c]
        v[i] = acc
    return v


@njit(cache=True)
def regret_matching(regrets, inf_first, inf_nact, out):
    for k in range(inf_first.shape[0]):
        lo = inf_first[k]
        m = inf_nact[k]
        total = 0.0
        for a in range(m):
            x = regrets[lo + a]
            if x > 0.0:
                total += x
        if total > 0.0:
            for a in range(m):
                x = regrets[lo + a]
                out[lo + a] = x / total if x > 0.0 else 0.0
        else:
            for a in range(m):
                out[lo + a] = 1.0 / m
    return out


@njit(cache=True)
def cfr_update(roles, parent, first_child, num_children, slot, chance_prob, utilities,
               sigma, regrets, strat_sum, player, weight, plus, inf_first, inf_nact, inf_player):
    """One regret and average-strategy update for ``player`` under ``sigma``."""
    n = roles.shape[0]
    own = np.empty(n)
    other = np.empty(n)
    own[0] = 1.0
    other[0] = 1.0
    for i in range(1, n):
        p = parent[i]
        rp = roles[p]
        if rp == CHANCE:
            own[i] = own[p]
            other[i] = other[p] * chance_prob[i]
        elif rp == player:
            own[i] = own[p] * sigma[slot[i]]
            other[i] = other[p]
        else:
            own[i] = own[p]
            other[i] = other[p] * sigma[slot[i]]
    sign = 1.0 if player == 0 else -1.0
    v = np.zeros(n)
    for i in range(n - 1, -1, -1):
        ri = roles[i]
        if ri == TERMINAL:
            v[i] = sign * utilities[i]
            continue
        lo = first_child[i]
        hi = lo + num_children[i]
        acc = 0.0
        if ri == CHANCE:
            for c in range(lo, hi):
                acc += chance_prob[c] * v[c]
        else:
            for c in range(lo, hi):
                acc += sigma[slot[c]] * v[c]
        v[i] = acc
        if ri == player:
            cf = other[i]
            w = weight * own[i]
            for c in range(lo, hi):
                s = slot[c]
                regrets[s] += cf * (v[c] - acc)
                strat_sum[s] += w * sigma[s]
    if plus:
        for k in range(inf_first.shape[0]):
            if inf_player[k] != player:
                continue
            lo = inf_first[k]
            for a in range(inf_nact[k]):
                if regrets[lo + a] < 0.0:
                    regrets[lo + a] = 0.0
    return v[0]



@njit(cache=True)
def cfr_iterations(roles, parent, first_child, num_children, slot, chance_prob, utilities,
                   sigma, regrets, strat_sum, t0, n_iter, plus, linear, alternating,
                   inf_first, inf_nact, inf_player):
    """Run iterations ``t0 + 1 .. t0 + n_iter`` in one call."""
    snapshot = np.empty_like(sigma)
    for t in range(t0 + 1, t0 + n_iter + 1):
        w = float(t) if linear else 1.0
        if alternating:
            for player in range(2):
                regret_matching(regrets, inf_first, inf_nact, sigma)
                cfr_update(roles, parent, first_child, num_children, slot, chance_prob, utilities,
                           sigma, regrets, strat_sum, player, w, plus, inf_first, inf_nact, inf_player)
        else:
            regret_matching(regrets, inf_first, inf_nact, sigma)
            snapshot[:] = sigma
            for player in range(2):
                cfr_update(roles, parent, first_child, num_children, slot, chance_prob, utilities,
                           snapshot, regrets, strat_sum, player, w, plus, inf_first, inf_nact, inf_player)



@njit(cache=True)
def pcfr_iterations(roles, parent, first_child, num_children, slot, chance_prob, utilities,
                    sigma, regrets, strat_sum, pred, t0, n_iter, power,
                    inf_first, inf_nact, inf_player):
    """Predictive CFR+: regret matching on (regrets + last instantaneous regret)."""
    inst = np.zeros_like(regrets)
    tmp = np.empty_like(regrets)
    for t in range(t0 + 1, t0 + n_iter + 1):
        w = float(t) ** power
        for player in range(2):
            for k in range(inf_first.shape[0]):
                lo = inf_first[k]
                for a in range(inf_nact[k]):
                    x = regrets[lo + a] + pred[lo + a]
                    tmp[lo + a] = x if x > 0.0 else 0.0
            regret_matching(tmp, inf_first, inf_nact, sigma)
            inst[:] = 0.0
            cfr_update(roles, parent, first_child, num_children, slot, chance_prob, utilities,
                       sigma, inst, strat_sum, player, w, False, inf_first, inf_nact, inf_player)
            for k in range(inf_first.shape[0]):
                if inf_player[k] != player:
                    continue
                lo = inf_first[k]
                for a in range(inf_nact[k]):
                    x = regrets[lo + a] + inst[lo + a]
                    regrets[lo + a] = x if x > 0.0 else 0.0
                    pred[lo + a] = inst[lo + a]


@njit(cache=True)
def best_response(roles, parent, slot, infoset, inf_player, inf_first, inf_nact,
                  chance_prob, utilities, sig, responder):
    """Sequence-form backward induction for ``responder`` against ``sig``.

    Returns (value for the responder, pure response as a slot vector,
    number of nodes visited).  Ties go to the lowest action index.
    """
    n = roles.shape[0]
    num_inf = inf_first.shape[0]
    num_slots = 0
    for k in range(num_inf):
        num_slots += inf_nact[k]
    sign = 1.0 if responder == 0 else -1.0
    w = np.empty(n)
    pseq = np.empty(n, dtype=np.int64)
    direct = np.zeros(num_slots + 1)
    child_sum = np.zeros(num_slots + 1)
    first_node = np.full(num_inf, -1, dtype=np.int64)
    w[0] = 1.0
    pseq[0] = 0
    visits = 0
    for i in range(n):
        visits += 1
        if i > 0:
            p = parent[i]
            rp = roles[p]
            if rp == CHANCE:
                w[i] = w[p] * chance_prob[i]
                pseq[i] = pseq[p]
            elif rp == responder:
                w[i] = w[p]
                pseq[i] = slot[i] + 1
            else:
                w[i] = w[p] * sig[slot[i]]
                pseq[i] = pseq[p]
        if roles[i] == TERMINAL:
            direct[pseq[i]] += w[i] * sign * utilities[i]
        elif infoset[i] >= 0 and first_node[infoset[i]] < 0:
            first_node[infoset[i]] = i
    order = np.argsort(-first_node)
    br = np.zeros(num_slots)
    for j in range(num_inf):
        k = order[j]
        if inf_player[k] != responder or first_node[k] < 0:
            continue
        lo = inf_first[k]
        best_a = 0
        best = direct[lo + 1] + child_sum[lo + 1]
        for a in range(1, inf_nact[k]):
            val = direct[lo + a + 1] + child_sum[lo + a + 1]
            if val > best + TIE_EPS:
                best = val
                best_a = a
        br[lo + best_a] = 1.0
        child_sum[pseq[first_node[k]]] += best
    return direct[0] + child_sum[0], br, visits


@njit(cache=True)
def sequence_values(roles, parent, slot, infoset, inf_player, inf_first, inf_nact,
                    chance_prob, utilities, sig, responder):
    """Per-action optimal continuation values (responder's view) at every infoset.

    Same pass as ``best_response`` but returns the full table of
    ``direct + child_sum`` per slot, for tie-aware comparisons.
    """
    n = roles.shape[0]
    num_inf = inf_first.shape[0]
    num_slots = 0
    for k in range(num_inf):
        num_slots += inf_nact[k]
    sign = 1.0 if responder == 0 else -1.0
    w = np.empty(n)
    pseq = np.empty(n, dtype=np.int64)
    direct = np.zeros(num_slots + 1)
    child_sum = np.zeros(num_slots + 1)
    first_node = np.full(num_inf, -1, dtype=np.int64)
    w[0] = 1.0
    pseq[0] = 0
    for i in range(n):
        if i > 0:
            p = parent[i]
            rp = roles[p]
            if rp == CHANCE:
                w[i] = w[p] * chance_prob[i]
                pseq[i] = pseq[p]
            elif rp == responder:
                w[i] = w[p]
                pseq[i] = slot[i] + 1
            else:
                w[i] = w[p] * sig[slot[i]]
                pseq[i] = pseq[p]
        if roles[i] == TERMINAL:
            direct[pseq[i]] += w[i] * sign * utilities[i]
        elif infoset[i] >= 0 and first_node[infoset[i]] < 0:
            first_node[infoset[i]] = i
    order = np.argsort(-first_node)
    qvals = np.zeros(num_slots)
    for j in range(num_inf):
        k = order[j]
        if inf_player[k] != responder or first_node[k] < 0:
            continue
        lo = inf_first[k]
        best = -1e300
        for a in range(inf_nact[k]):
            val = direct[lo + a + 1] + child_sum[lo + a + 1]
            qvals[lo + a] = val
            if val > best:
                best = val
        child_sum[pseq[first_node[k]]] += best
    return qvals


# ---------------------------------------------------------------------------
# counter-based sampling (mirrors abdsolve.rng)

GOLDEN = uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def mix64(x):
    x = x + uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> uint64(27))) * uint64(0x94D049BB133111EB)
    return x ^ (x >> uint64(31))


@njit(cache=True)
def draw(key, counter):
    """Uniform in [0, 1): draw number ``counter`` (1-based) of stream ``key``."""
    x = mix64(key ^ (uint64(counter) * uint64(0x9E3779B97F4A7C15)))
    return float(x >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def rollout_tree(roles, first_child, num_children, slot, chance_prob, utilities, sig,
                 starts, keys, n_samples):
    """Mean terminal utility of ``n_samples`` rollouts from ``starts[j]`` on stream ``keys[j]``."""
    out = np.empty(keys.shape[0])
    for j in range(keys.shape[0]):
        key = keys[j]
        counter = 0
        total = 0.0
        for _ in range(n_samples):
            node = starts[j]
            while roles[node] != TERMINAL:
                counter += 1
                u = draw(key, counter)
                lo = first_child[node]
                m = num_children[node]
                acc = 0.0
                pick = -1
                for c in range(lo, lo + m):
                    pr = chance_prob[c] if roles[node] == CHANCE else sig[slot[c]]
                    if pr > 0.0:
                        pick = c
                        acc += pr
                        if u < acc:
                            break
                node = pick
            total += utilities[node]
        out[j] = total / n_samples
    return out
