"""Single-step and pairwise collision probabilities against polyhedral obstacles.

With ``h_i = a_i . x - b_i`` the signed distance to constraint ``i``, a position
lies inside a polytope iff every ``h_i >= 0``.  For a Gaussian position the
``h`` vector is Gaussian too, so each probability is an orthant probability:
``p_t = sum_l P(h_l(x_t) >= 0)`` and ``p_{s,t} = sum_{l,m} P(h_l(x_s) >= 0, h_m(x_t) >= 0)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distribution import TrajectoryDistribution
from .orthant import DEFAULT_MAX_POINTS, DEFAULT_TOLERANCE, OrthantQuery, orthant_probability
from .scenario import Polytope

DEFAULT_SKIP_THRESHOLD = 1e-9

_STEP_TAG = 0
_PAIR_TAG = 1


@dataclass(frozen=True)
class CollisionProbabilities:
    p: np.ndarray  # (T+1,)
    p_err: np.ndarray
    p_obstacle: np.ndarray  # (T+1, L)
    p_obstacle_err: np.ndarray
    pairs: np.ndarray  # (T+1, T+1), symmetric, zero diagonal
    pairs_err: np.ndarray
    skipped: np.ndarray  # (T+1, T+1) bool, pairs substituted by 0
    computed: np.ndarray  # (T+1, T+1) bool, pairs that were evaluated or skipped

    @property
    def n_events(self) -> int:
        return self.p.shape[0]


def _stack(obstacles: Sequence[Polytope]):
    return [(poly.normals, poly.offsets) for poly in obstacles]


def _entry_seed(seed: int, *idx: int) -> tuple[int, ...]:
    return (int(seed),) + tuple(int(i) for i in idx)


def step_obstacle_probs(
    dist: TrajectoryDistribution,
    obstacles: Sequence[Polytope],
    t: int,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    max_points: int = DEFAULT_MAX_POINTS,
) -> tuple[np.ndarray, np.ndarray]:
    """``P(x_t in obstacle l)`` and its error for every obstacle ``l``."""
    X = dist.position_covs[t]
    x = dist.plan_positions[t]
    vals = np.zeros(len(obstacles))
    errs = np.zeros(len(obstacles))
    for l, (A, b) in enumerate(_stack(obstacles)):
        q = OrthantQuery(A @ x - b, A @ X @ A.T, tolerance, _entry_seed(seed, _STEP_TAG, t, l), max_points)
        est = orthant_probability(q)
        vals[l], errs[l] = est.value, est.error
    return vals, errs


def step_collision_prob(
    dist: TrajectoryDistribution,
    obstacles: Sequence[Polytope],
    t: int,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    max_points: int = DEFAULT_MAX_POINTS,
) -> tuple[float, float]:
    if not 0 <= t <= dist.horizon:
        raise IndexError(f"step {t} outside 0..{dist.horizon}")
    vals, errs = step_obstacle_probs(dist, obstacles, t, tolerance, seed, max_points)
    return min(1.0, float(vals.sum())), float(errs.sum())


def _pair_term(xs, xt, Xs, Xt, K, Al, bl, Am, bm, tolerance, seed, max_points):
    mean = np.concatenate([Al @ xs - bl, Am @ xt - bm])
    cross = Al @ K @ Am.T
    cov = np.block([[Al @ Xs @ Al.T, cross], [cross.T, Am @ Xt @ Am.T]])
    return orthant_probability(OrthantQuery(mean, cov, tolerance, seed, max_points))


def pair_collision_prob(
    dist: TrajectoryDistribution,
    obstacles: Sequence[Polytope],
    s: int,
    t: int,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    max_points: int = DEFAULT_MAX_POINTS,
) -> tuple[float, float]:
    """``P(x_s in obstacles, x_t in obstacles)`` summed over all ordered obstacle pairs."""
    if not 0 <= s < t <= dist.horizon:
        raise IndexError(f"need 0 <= s < t <= {dist.horizon}, got ({s}, {t})")
    # same recursion as the batched sweep, so both paths agree bit for bit
    K = dist.cross_position_row(s)[t - s]
    total, err = 0.0, 0.0
    polys = _stack(obstacles)
    for l, (Al, bl) in enumerate(polys):
        for m, (Am, bm) in enumerate(polys):
            est = _pair_term(
                dist.plan_positions[s], dist.plan_positions[t],
                dist.position_covs[s], dist.position_covs[t], K, Al, bl, Am, bm,
                tolerance, _entry_seed(seed, _PAIR_TAG, s, t, l, m), max_points,
            )
            total += est.value
            err += est.error
    return min(1.0, total), err


def _pair_row(
    dist, polys, s, targets, p_obs, p_obs_err, skip_threshold, tolerance, seed, max_points
):
    """Pair probabilities (s, t) for t in ``targets``; returns list of (t, p, err, skipped)."""
    out = []
    Krow = None
    xs, Xs = dist.plan_positions[s], dist.position_covs[s]
    ps = p_obs[s].sum()
    for t in targets:
        pt = p_obs[t].sum()
        if skip_threshold > 0.0 and min(ps, pt) < skip_threshold:
            bound = min(ps + p_obs_err[s].sum(), pt + p_obs_err[t].sum())
            out.append((t, 0.0, bound, True))
            continue
        if Krow is None:
            Krow = dist.cross_position_row(s)
        K = Krow[t - s]
        total, err = 0.0, 0.0
        for l, (Al, bl) in enumerate(polys):
            for m, (Am, bm) in enumerate(polys):
                a, c = p_obs[s, l], p_obs[t, m]
                if skip_threshold > 0.0 and min(a, c) < skip_threshold:
                    err += min(a + p_obs_err[s, l], c + p_obs_err[t, m])
                    continue
                est = _pair_term(
                    xs, dist.plan_positions[t], Xs, dist.position_covs[t], K,
                    Al, bl, Am, bm, tolerance,
                    _entry_seed(seed, _PAIR_TAG, s, t, l, m), max_points,
                )
                total += est.value
                err += est.error
        out.append((t, min(1.0, total), err, False))
    return out


def all_collision_probs(
    dist: TrajectoryDistribution,
    obstacles: Sequence[Polytope],
    skip_threshold: float = DEFAULT_SKIP_THRESHOLD,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    max_points: int = DEFAULT_MAX_POINTS,
    pairs: str = "all",
    threads: int = 1,
) -> CollisionProbabilities:
    """Every ``p_t`` and the pairwise ``p_{s,t}``.

    ``pairs="chain"`` evaluates only consecutive pairs ``(t-1, t)``, which is
    all the chain spanning-tree bound needs.  A pair whose smaller marginal is
    below ``skip_threshold`` is recorded as 0 with that marginal as its error;
    the same substitution is applied per obstacle pair.  Entries use seeds
    derived from their indices, so the result does not depend on ``threads``.
    """
    if pairs not in ("all", "chain"):
        raise ValueError(f"pairs must be 'all' or 'chain', got {pairs!r}")
    T1 = dist.horizon + 1
    L = len(obstacles)
    p_obs = np.zeros((T1, L))
    p_obs_err = np.zeros((T1, L))
    for t in range(T1):
        p_obs[t], p_obs_err[t] = step_obstacle_probs(dist, obstacles, t, tolerance, seed, max_points)
    p = np.minimum(p_obs.sum(axis=1), 1.0)
    p_err = p_obs_err.sum(axis=1)

    P = np.zeros((T1, T1))
    E = np.zeros((T1, T1))
    skipped = np.zeros((T1, T1), dtype=bool)
    computed = np.zeros((T1, T1), dtype=bool)
    polys = _stack(obstacles)
    if pairs == "all":
        jobs = [(s, list(range(s + 1, T1))) for s in range(T1 - 1)]
    else:
        jobs = [(s, [s + 1]) for s in range(T1 - 1)]

    def run(job):
        s, targets = job
        return s, _pair_row(
            dist, polys, s, targets, p_obs, p_obs_err, skip_threshold, tolerance, seed, max_points
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    for s, row in results:
        for t, val, err, skip in row:
            P[s, t] = P[t, s] = val
            E[s, t] = E[t, s] = err
            skipped[s, t] = skipped[t, s] = skip
            computed[s, t] = computed[t, s] = True
    return CollisionProbabilities(p, p_err, p_obs, p_obs_err, P, E, skipped, computed)
