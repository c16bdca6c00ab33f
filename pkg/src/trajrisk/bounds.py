"""First- and second-order bounds on the probability of a union of events.

All bounds take the marginals ``p[t] = P(E_t)`` and, for the second-order ones,
pairwise intersections ``pairs[s, t] = P(E_s & E_t)``.  Upper bounds: Boole,
Kwerel, Kounias (best star), Hunter (maximum-weight spanning tree) and Hunter
restricted to the chain ``0-1-...-T``.  Lower bounds: Frechet, second-order
Bonferroni and Dawson-Sankoff.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionProbabilities

UPPER = ("boole", "kwerel", "kounias", "hunter_opt", "hunter_chain")
LOWER = ("frechet", "bonferroni2", "dawson")


def _clamp(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def first_order_bounds(p) -> tuple[float, float]:
    """(Boole upper, Frechet lower)."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        raise ValueError("need at least one event")
    return _clamp(p.sum()), _clamp(p.max())


def dawson_sankoff(S1: float, S2: float) -> float:
    if S1 <= 0.0:
        return 0.0
    k = 1 + math.floor(2.0 * S2 / S1)
    return _clamp(2.0 / (k + 1) * S1 - 2.0 / (k * (k + 1)) * S2)


def second_order_scalar_bounds(S1: float, S2: float, n_events: int) -> tuple[float, float, float]:
    """(Kwerel upper, Bonferroni lower, Dawson-Sankoff lower) from ``S1``, ``S2``."""
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    if S1 <= 0.0:
        return 0.0, 0.0, 0.0
    kwerel = _clamp(S1 - 2.0 / n_events * S2)
    bonf = _clamp(S1 - S2)
    return kwerel, bonf, dawson_sankoff(S1, S2)


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[rj] = ri
        return True


def max_spanning_tree(weights: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Kruskal on the complete graph with edges sorted by (-weight, s, t)."""
    n = weights.shape[0]
    s_idx, t_idx = np.triu_indices(n, k=1)
    w = weights[s_idx, t_idx]
    # lexsort: last key is primary
    order = np.lexsort((t_idx, s_idx, -w))
    dsu = _DisjointSet(n)
    edges: list[tuple[int, int]] = []
    total = 0.0
    for e in order:
        s, t = int(s_idx[e]), int(t_idx[e])
        if dsu.union(s, t):
            edges.append((s, t))
            total += float(w[e])
            if len(edges) == n - 1:
                break
    return edges, total


def tree_bounds(p, pairs) -> tuple[float, float, float, list[tuple[int, int]]]:
    """(Kounias, optimal Hunter, chain Hunter, optimal tree edges)."""
    p = np.asarray(p, dtype=float)
    W = np.array(pairs, dtype=float)
    np.fill_diagonal(W, 0.0)
    S1 = float(p.sum())
    star = float(W.sum(axis=1).max()) if W.size else 0.0
    tree, weight = max_spanning_tree(W)
    chain = float(np.diag(W, k=1).sum())
    # chain and stars are spanning trees too; guards against summation-order rounding
    weight = max(weight, chain, star)
    return _clamp(S1 - star), _clamp(S1 - weight), _clamp(S1 - chain), tree


@dataclass
class BoundReport:
    S1: float
    S2: float
    n_events: int
    boole: float
    kwerel: float
    kounias: float
    hunter_opt: float
    hunter_chain: float
    frechet: float
    bonferroni2: float
    dawson: float
    tree: list[tuple[int, int]]
    errors: dict[str, float] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def upper(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in UPPER}

    def lower(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in LOWER}

    def as_dict(self) -> dict:
        return {
            "S1": self.S1,
            "S2": self.S2,
            "n_events": self.n_events,
            "bounds": self.upper() | self.lower(),
            "errors": dict(self.errors),
            "hunter_tree": [list(e) for e in self.tree],
            "timings": dict(self.timings),
        }


def _bound_errors(cp: CollisionProbabilities, S1: float, S2: float) -> dict[str, float]:
    """Integration error carried by each bound (first order in the input errors)."""
    iu = np.triu_indices(cp.n_events, k=1)
    e1 = float(cp.p_err.sum())
    e2 = float(cp.pairs_err[iu].sum())
    chain = float(np.diag(cp.pairs_err, k=1).sum())
    n = cp.n_events
    if S1 > 0.0:
        k = 1 + math.floor(2.0 * S2 / S1)
        e_dawson = 2.0 / (k + 1) * e1 + 2.0 / (k * (k + 1)) * e2
    else:
        e_dawson = e1 + e2
    return {
        "boole": e1,
        "kwerel": e1 + 2.0 / n * e2,
        "kounias": e1 + e2,
        "hunter_opt": e1 + e2,
        "hunter_chain": e1 + chain,
        "frechet": float(cp.p_err.max()),
        "bonferroni2": e1 + e2,
        "dawson": e_dawson,
    }


def compute_report(cp: CollisionProbabilities) -> BoundReport:
    n = cp.n_events
    p = cp.p
    W = np.array(cp.pairs, dtype=float)
    np.fill_diagonal(W, 0.0)
    timings: dict[str, float] = {}
    clock = time.perf_counter

    t0 = clock()
    boole, _ = first_order_bounds(p)
    S1 = float(p.sum())
    timings["boole"] = clock() - t0
    t0 = clock()
    frechet = _clamp(p.max())
    timings["frechet"] = clock() - t0
    t0 = clock()
    S2 = float(np.triu(W, k=1).sum())
    timings["S2"] = clock() - t0
    t0 = clock()
    kwerel = _clamp(S1 - 2.0 / n * S2) if S1 > 0.0 else 0.0
    timings["kwerel"] = clock() - t0
    t0 = clock()
    bonf = _clamp(S1 - S2) if S1 > 0.0 else 0.0
    timings["bonferroni2"] = clock() - t0
    t0 = clock()
    dawson = dawson_sankoff(S1, S2)
    timings["dawson"] = clock() - t0
    t0 = clock()
    star = float(W.sum(axis=1).max())
    kounias = _clamp(S1 - star)
    timings["kounias"] = clock() - t0
    t0 = clock()
    chain = float(np.diag(W, k=1).sum())
    hunter_chain = _clamp(S1 - chain)
    timings["hunter_chain"] = clock() - t0
    t0 = clock()
    tree, weight = max_spanning_tree(W)
    hunter_opt = _clamp(S1 - max(weight, chain, star))
    timings["hunter_opt"] = clock() - t0
    return BoundReport(
        S1=S1, S2=S2, n_events=n,
        boole=boole, kwerel=kwerel, kounias=kounias,
        hunter_opt=hunter_opt, hunter_chain=hunter_chain,
        frechet=frechet, bonferroni2=bonf, dawson=dawson,
        tree=tree,
        errors=_bound_errors(cp, S1, S2),
        timings=timings,
    )


def bounds_from_probabilities(p, pairs) -> BoundReport:
    """Report from plain arrays (no integration errors)."""
    p = np.asarray(p, dtype=float)
    pairs = np.asarray(pairs, dtype=float)
    n = p.shape[0]
    zeros = np.zeros((n, n))
    cp = CollisionProbabilities(
        p, np.zeros(n), p[:, None], np.zeros((n, 1)), pairs, zeros,
        zeros.astype(bool), np.ones((n, n), dtype=bool),
    )
    return compute_report(cp)
