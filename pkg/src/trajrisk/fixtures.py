"""Synthetic ground-robot environments for tests, demos and benchmarks.

Paths are straight segments between waypoints (no planner); obstacles are
random convex polygons placed close to, but clear of, the planned positions.
"""

from __future__ import annotations

import numpy as np

from .scenario import Polytope, Scenario, make_ground_robot_scenario

Z_SCALE = 1e-3


def random_convex_polygon(rng: np.random.Generator, radius: float, n_vertices: int) -> np.ndarray:
    """Counter-clockwise vertices of a random convex polygon around the origin."""
    while True:
        ang = np.sort(rng.uniform(0.0, 2 * np.pi, n_vertices))
        gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
        if gaps.max() < np.pi * 0.9:
            break
    r = radius * rng.uniform(0.7, 1.0, n_vertices)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def _separated(p: np.ndarray, q: np.ndarray, margin: float) -> bool:
    """Separating-axis test for convex polygons given by vertices."""
    for poly in (p, q):
        e = np.roll(poly, -1, axis=0) - poly
        normals = np.column_stack([e[:, 1], -e[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        for n in normals:
            a, b = p @ n, q @ n
            if a.max() + margin < b.min() or b.max() + margin < a.min():
                return True
    return False


def clearance(poly: Polytope, points: np.ndarray) -> np.ndarray:
    """Lower bound on the distance from each point to the polytope (<= 0 inside)."""
    return -poly.margins(points).min(axis=-1)


def random_scenario(
    rng: np.random.Generator,
    n_obstacles: int | None = None,
    horizon: int | None = None,
    z_scale: float = Z_SCALE,
    gap: tuple[float, float] = (0.0, 0.06),
) -> Scenario:
    """Nominally safe random unit-square scenario.

    ``gap`` is the range of distances between a planned position and the
    nearest face of the obstacle placed beside it.
    """
    if n_obstacles is None:
        n_obstacles = int(rng.integers(2, 6))
    if horizon is None:
        horizon = int(rng.integers(15, 41))
    for _ in range(1000):
        start = rng.uniform(0.05, 0.95, 2)
        goal = rng.uniform(0.05, 0.95, 2)
        if np.linalg.norm(goal - start) >= 0.5:
            break
    if horizon % 2 == 0 and rng.random() < 0.5:
        mid = 0.5 * (start + goal) + rng.normal(0.0, 0.1, 2)
        waypoints = np.vstack([start, np.clip(mid, 0.05, 0.95), goal])
        sps = horizon // 2
    else:
        waypoints = np.vstack([start, goal])
        sps = horizon
    base = make_ground_robot_scenario(waypoints, sps, z_scale)
    x = base.plan.positions
    polys: list[np.ndarray] = []
    obstacles: list[Polytope] = []
    attempts = 0
    while len(obstacles) < n_obstacles and attempts < 2000:
        attempts += 1
        j = int(rng.integers(1, x.shape[0]))
        seg = x[min(j, x.shape[0] - 1)] - x[j - 1]
        direction = np.array([-seg[1], seg[0]]) / max(np.linalg.norm(seg), 1e-12)
        if rng.random() < 0.5:
            direction = -direction
        verts = random_convex_polygon(rng, rng.uniform(0.04, 0.12), int(rng.integers(3, 7)))
        reach = (verts @ -direction).max()
        center = x[j] + direction * (reach + rng.uniform(*gap))
        verts = verts + center
        poly = Polytope.from_vertices(verts)
        if clearance(poly, x).min() <= 1e-3:
            continue
        if not all(_separated(verts, other, 1e-3) for other in polys):
            continue
        polys.append(verts)
        obstacles.append(poly)
    return make_ground_robot_scenario(waypoints, sps, z_scale, obstacles)


def beside_segment(p, q, start: float, stop: float, gap: float, width: float, side: int) -> Polytope:
    """Rectangle parallel to segment ``p -> q`` covering fractions ``start..stop``,
    ``gap`` away from it on the left (``side=1``) or right (``side=-1``)."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    u = (q - p) / np.linalg.norm(q - p)
    n = side * np.array([-u[1], u[0]])
    a, b = p + start * (q - p), p + stop * (q - p)
    verts = [a + gap * n, b + gap * n, b + (gap + width) * n, a + (gap + width) * n]
    if side < 0:
        verts = verts[::-1]
    return Polytope.from_vertices(verts)


DEMO_WAYPOINTS = ((0.1, 0.1), (0.5, 0.35), (0.9, 0.9))


def demo_scenario(steps_per_segment: int = 10, dt: float = 0.25) -> Scenario:
    """Fixed ground-robot environment: a bent path with three walls alongside.

    The base sampling period ``dt = 0.25`` puts the LQG loop close to its
    continuous-time behaviour, which is what the refinement sweep probes.
    """
    w = DEMO_WAYPOINTS
    obstacles = (
        beside_segment(w[0], w[1], 0.3, 0.7, 0.04, 0.1, 1),
        beside_segment(w[1], w[2], 0.1, 0.4, 0.045, 0.1, -1),
        beside_segment(w[1], w[2], 0.6, 0.9, 0.05, 0.1, 1),
    )
    return make_ground_robot_scenario(w, steps_per_segment, Z_SCALE, obstacles, dt)
