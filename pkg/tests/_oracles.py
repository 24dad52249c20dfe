"""Independent reference implementations used to cross-check the package.

Everything here is deliberately naive: Floyd-Warshall closures, quadratic
rank counting, numeric quadrature.  None of it shares code paths with the
implementations under test.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


def reachability(node_ids: list[str], edges) -> np.ndarray:
    """Reflexive transitive closure as a boolean matrix over node_ids order."""
    idx = {v: i for i, v in enumerate(node_ids)}
    n = len(node_ids)
    reach = np.eye(n, dtype=bool)
    for src, dst in edges:
        reach[idx[src], idx[dst]] = True
    for k in range(n):
        reach |= reach[:, k : k + 1] & reach[k : k + 1, :]
    return reach


def scc_partition(node_ids: list[str], edges) -> set[frozenset[str]]:
    reach = reachability(node_ids, edges)
    mutual = reach & reach.T
    out = set()
    for i, v in enumerate(node_ids):
        out.add(frozenset(node_ids[j] for j in np.flatnonzero(mutual[i])))
    return out


def bowtie_assignment(node_ids: list[str], edges) -> dict[str, str]:
    """Five-way bow-tie labels computed straight from the closure matrix."""
    node_ids = sorted(node_ids)
    reach = reachability(node_ids, edges)
    sccs = sorted(scc_partition(node_ids, edges), key=lambda s: (-len(s), min(s)))
    lscc = sccs[0]
    idx = {v: i for i, v in enumerate(node_ids)}
    lscc_idx = [idx[v] for v in lscc]

    labels: dict[str, str] = {}
    in_set, out_set = set(), set()
    for v in node_ids:
        if v in lscc:
            labels[v] = "LSCC"
            continue
        i = idx[v]
        reaches_core = bool(reach[i, lscc_idx].any())
        reached_from_core = bool(reach[lscc_idx, i].any())
        if reaches_core:
            labels[v] = "IN"
            in_set.add(v)
        elif reached_from_core:
            labels[v] = "OUT"
            out_set.add(v)
    for v in node_ids:
        if v in labels:
            continue
        i = idx[v]
        from_in = any(reach[idx[u], i] for u in in_set)
        to_out = any(reach[i, idx[w]] for w in out_set)
        labels[v] = "Tendrils" if (from_in or to_out) else "Disconnected"
    return labels


def midranks(values) -> np.ndarray:
    """Average mid-ranks by explicit counting, quadratic on purpose."""
    vals = list(values)
    out = []
    for v in vals:
        less = sum(1 for w in vals if w < v)
        eq = sum(1 for w in vals if w == v)
        out.append(less + (eq + 1) / 2.0)
    return np.array(out, dtype=float)


def t_sf(t_stat: float, df: int) -> float:
    """Student-t survival function by quadrature of the density."""
    log_c = math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0) - 0.5 * math.log(df * math.pi)
    c = math.exp(log_c)

    def density(x: float) -> float:
        return c * (1.0 + x * x / df) ** (-(df + 1) / 2.0)

    value, _ = quad(density, t_stat, np.inf)
    return value


def two_sided_p(r: float, n: int) -> float:
    if abs(r) == 1.0:
        return 0.0
    t_stat = abs(r) * math.sqrt((n - 2) / (1.0 - r * r))
    return min(1.0, 2.0 * t_sf(t_stat, n - 2))
