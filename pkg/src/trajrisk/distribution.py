"""Joint Gaussian law of the closed-loop trajectory.

Covariances are propagated step by step (``Sigma_{t+1} = Abar_t Sigma_t Abar_t' + Wbar_t``)
instead of assembling the stacked ``N diag(Wbar) N'`` matrix.  Cross-covariances
``Cov(xbar_s, xbar_t) = Sigma_s (Abar_{t-1} ... Abar_s)'`` are produced on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lqg import ClosedLoopModel


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray


class TrajectoryDistribution:
    """Zero-mean augmented-state Gaussian plus the plan positions as offsets."""

    def __init__(self, model: ClosedLoopModel, plan_positions: np.ndarray, sigma: np.ndarray):
        self.model = model
        self.plan_positions = np.asarray(plan_positions, dtype=float)
        self.sigma = sigma  # (T+1, 2d, 2d)
        self.sigma.setflags(write=False)

    @property
    def horizon(self) -> int:
        return self.model.horizon

    @property
    def dim(self) -> int:
        return self.model.dim

    @cached_property
    def position_covs(self) -> np.ndarray:
        """X_t for t = 0..T, shape (T+1, d, d)."""
        d = self.dim
        X = np.ascontiguousarray(self.sigma[:, :d, :d])
        X.setflags(write=False)
        return X

    def transition(self, s: int, t: int) -> np.ndarray:
        """Abar_{t-1} ... Abar_s (identity when s == t)."""
        phi = np.eye(2 * self.dim)
        for k in range(s, t):
            phi = self.model.A[k] @ phi
        return phi

    def cross_cov(self, s: int, t: int) -> np.ndarray:
        """Cov(xbar_s, xbar_t) for s <= t."""
        return self.sigma[s] @ self.transition(s, t).T

    def cross_position_row(self, s: int) -> np.ndarray:
        """K_{s,t} = Cov(x_s, x_t) for all t = s..T, shape (T+1-s, d, d)."""
        d, T = self.dim, self.horizon
        lam = self.sigma[s][:d, :]  # rows of Cov(x_s, xbar_t)
        out = np.empty((T + 1 - s, d, d))
        out[0] = lam[:, :d]
        for k, t in enumerate(range(s, T), start=1):
            lam = lam @ self.model.A[t].T
            out[k] = lam[:, :d]
        return out

    def position_marginal(self, t: int) -> Gaussian:
        if not 0 <= t <= self.horizon:
            raise IndexError(f"step {t} outside 0..{self.horizon}")
        return Gaussian(self.plan_positions[t].copy(), self.position_covs[t].copy())

    def position_joint(self, s: int, t: int) -> Gaussian:
        if not 0 <= s < t <= self.horizon:
            raise IndexError(f"need 0 <= s < t <= {self.horizon}, got ({s}, {t})")
        d = self.dim
        K = self.cross_cov(s, t)[:d, :d]
        cov = np.block([[self.position_covs[s], K], [K.T, self.position_covs[t]]])
        mean = np.concatenate([self.plan_positions[s], self.plan_positions[t]])
        return Gaussian(mean, cov)


def propagate(model: ClosedLoopModel, plan_positions: np.ndarray) -> TrajectoryDistribution:
    T, n = model.A.shape[0], model.A.shape[1]
    plan_positions = np.asarray(plan_positions, dtype=float)
    if plan_positions.shape != (T + 1, n // 2):
        raise ValueError(
            f"plan positions have shape {plan_positions.shape}, expected {(T + 1, n // 2)}"
        )
    sigma = np.zeros((T + 1, n, n))
    for t in range(T):
        S = model.A[t] @ sigma[t] @ model.A[t].T + model.W[t]
        sigma[t + 1] = 0.5 * (S + S.T)
    return TrajectoryDistribution(model, plan_positions, sigma)


def stacked_covariance(model: ClosedLoopModel) -> np.ndarray:
    """Explicit ``N diag(Wbar_t) N'`` for the whole trajectory (small T only)."""
    T, n = model.A.shape[0], model.A.shape[1]
    N = np.zeros(((T + 1) * n, T * n))
    for row in range(1, T + 1):
        block = np.eye(n)
        for col in range(row - 1, -1, -1):
            N[row * n:(row + 1) * n, col * n:(col + 1) * n] = block
            block = block @ model.A[col]
    Wdiag = np.zeros((T * n, T * n))
    for t in range(T):
        Wdiag[t * n:(t + 1) * n, t * n:(t + 1) * n] = model.W[t]
    return N @ Wdiag @ N.T
