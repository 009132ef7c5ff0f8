"""Independent brute-force reference for selection and isolation.

Everything here re-derives the pipeline from first principles: subsets
by direct enumeration, worst deviations and argmins by explicit scans,
unions by set arithmetic, votes by hand-counted dictionaries.  Only the
Euclidean norm primitive is shared with the package, so agreement can
be checked bit for bit.
"""

import math
from itertools import combinations

import numpy as np


def enumerate_members(p, size):
    return list(combinations(range(1, p + 1), size))


def deviation(a, b):
    d = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    return d if math.isfinite(d) else math.inf


def pi_table(est_j, est_s, p, q):
    """Deviation score of every (p-q)-subset: dict members -> float."""
    s_size = p - 2 * q
    table = {}
    for jm in enumerate_members(p, p - q):
        worst = -math.inf
        for sm in combinations(jm, s_size):
            d = deviation(est_j[jm], est_s[sm])
            if d > worst:
                worst = d
        table[jm] = worst
    return table

def argmin_selection(pi_by_members):
    """First strict minimum in lexicographic member order; None if all inf."""
    best, best_val = None, math.inf
    for jm in sorted(pi_by_members):
        if pi_by_members[jm] < best_val:
            best, best_val = jm, pi_by_members[jm]
    return best


def union_of_passing(pi_by_members, thresholds_by_members):
    out = set()
    for jm, score in pi_by_members.items():
        if score <= thresholds_by_members[jm]:
            out |= set(jm)
    return frozenset(out)


def windowed_votes(unions_by_step, p, q, k_bar_star, window):
    """Replicate the vote: list of dicts per window plus verdicts.

    Returns a list of (k_start, k_end, counts, winner, isolated,
    no_quorum) tuples covering every full window after k_bar_star.
    """
    quorum = p - q
    usable = {k: u for k, u in unions_by_step.items() if k >= k_bar_star}
    last = max(usable) if usable else k_bar_star - 1
    out = []
    i = 1
    while k_bar_star + i * window - 1 <= last:
        k_start = k_bar_star + (i - 1) * window
        k_end = k_bar_star + i * window - 1
        counts = {}
        for k in range(k_start, k_end + 1):
            u = tuple(sorted(usable.get(k, ())))
            if k in usable and len(u) >= quorum:
                counts[u] = counts.get(u, 0) + 1
        if counts:
            top = -1
            winner = None
            for u in sorted(counts):
                if counts[u] > top:
                    top, winner = counts[u], u
            isolated = tuple(s for s in range(1, p + 1) if s not in winner)
            out.append((k_start, k_end, counts, winner, isolated, False))
        else:
            out.append((k_start, k_end, {}, None, (), True))
        i += 1
    return out
