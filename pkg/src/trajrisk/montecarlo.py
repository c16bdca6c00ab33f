"""Plain Monte Carlo estimate of the end-to-end failure probability."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lqg import ClosedLoopModel
from .scenario import PlannedTrajectory, Polytope

BLOCK = 4096
PSD_TOL = 1e-10


@dataclass(frozen=True)
class McResult:
    estimate: float
    std_error: float
    n_samples: int
    failures: int
    seed: int
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "p_hat": self.estimate,
            "se": self.std_error,
            "n": self.n_samples,
            "failures": self.failures,
            "seed": self.seed,
            "seconds": self.seconds,
        }


def noise_factors(model: ClosedLoopModel) -> np.ndarray:
    """Square-root factors ``S_t`` with ``S_t S_t' = Wbar_t``."""
    vals, vecs = np.linalg.eigh(model.W)
    if vals.min() < -PSD_TOL:
        raise ValueError(f"augmented noise covariance not PSD (eigenvalue {vals.min():.3g})")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]


def _block_noise(seed: int, block: int, rows: int, T: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=[int(seed), int(block)]))
    return rng.standard_normal((rows, T, n))


def sample_executions(
    model: ClosedLoopModel,
    plan: PlannedTrajectory,
    n: int,
    seed: int = 0,
    start: int = 0,
    factors: np.ndarray | None = None,
) -> np.ndarray:
    """Executed positions for trajectory indices ``start .. start+n-1``.

    Returns an array of shape (n, T+1, d).  Noise for trajectory ``i`` comes
    from the counter-based stream keyed by ``(seed, i // BLOCK)`` at row
    ``i % BLOCK``, so a trajectory's draws do not depend on how the batch is
    split.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    T, n2 = model.A.shape[0], model.A.shape[1]
    d = n2 // 2
    S = noise_factors(model) if factors is None else factors
    out = np.empty((n, T + 1, d))
    out[:, 0, :] = 0.0
    done = 0
    while done < n:
        idx = start + done
        block, offset = divmod(idx, BLOCK)
        rows = min(BLOCK - offset, n - done)
        xi = _block_noise(seed, block, offset + rows, T, n2)[offset:]
        x = np.zeros((rows, n2))
        for t in range(T):
            x = x @ model.A[t].T + xi[:, t, :] @ S[t].T
            out[done:done + rows, t + 1, :] = x[:, :d]
        done += rows
    out += plan.positions[None, :, :]
    return out


def collides(positions: np.ndarray, obstacles: Sequence[Polytope]) -> np.ndarray:
    """Per-trajectory flag: any step inside any obstacle (faces count as inside)."""
    hit = np.zeros(positions.shape[0], dtype=bool)
    for poly in obstacles:
        inside = np.ones(positions.shape[:2], dtype=bool)
        for a, b in zip(poly.normals, poly.offsets):
            inside &= positions @ a >= b
        hit |= inside.any(axis=1)
    return hit


def estimate_failure(batch: np.ndarray, obstacles: Sequence[Polytope], seed: int = 0) -> McResult:
    n = batch.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    fails = int(collides(batch, obstacles).sum())
    return _result(fails, n, seed, 0.0)


def _result(fails: int, n: int, seed: int, seconds: float) -> McResult:
    p = fails / n
    return McResult(p, math.sqrt(p * (1.0 - p) / n), n, fails, seed, seconds)


def monte_carlo(
    model: ClosedLoopModel,
    plan: PlannedTrajectory,
    obstacles: Sequence[Polytope],
    n: int,
    seed: int = 0,
) -> McResult:
    """Stream ``n`` sampled executions in blocks and count failures."""
    t0 = time.perf_counter()
    S = noise_factors(model)
    fails = 0
    for start in range(0, n, BLOCK):
        rows = min(BLOCK, n - start)
        batch = sample_executions(model, plan, rows, seed, start, S)
        fails += int(collides(batch, obstacles).sum())
    return _result(fails, n, seed, time.perf_counter() - t0)
