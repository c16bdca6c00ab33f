"""Finite-horizon LQG tracking controller and its closed-loop augmented dynamics.

The augmented state stacks the deviation from the plan and its a priori
estimate, ``xbar_t = [x_t; xhat_{t|t-1}]``, and evolves as
``xbar_{t+1} = Abar_t xbar_t + wbar_t`` with ``wbar_t ~ N(0, Wbar_t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import LinearSystem


class NumericalError(RuntimeError):
    pass


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class LqrSolution:
    gains: np.ndarray  # F_t, (T, m, d)
    riccati: np.ndarray  # H_t, (T, d, d)


@dataclass(frozen=True)
class KalmanSolution:
    gains: np.ndarray  # G_t, (T, d, q); G_0 = 0
    prior_cov: np.ndarray  # P_{t|t-1}, (T, d, d); P_{0|-1} = 0
    posterior_cov: np.ndarray  # P_{t|t}, (T, d, d); P_{0|0} = 0


@dataclass(frozen=True)
class ClosedLoopModel:
    A: np.ndarray  # Abar_t, (T, 2d, 2d)
    W: np.ndarray  # Wbar_t, (T, 2d, 2d)

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1] // 2


def solve_lqr(system: LinearSystem) -> LqrSolution:
    """Backward Riccati recursion with ``H_{T-1} = Q_{T-1}``.

    ``H_{t-1} = Q_{t-1} + A_t' H_t A_t - A_t' H_t B_t (B_t' H_t B_t + R_t)^-1 B_t' H_t A_t``
    and ``F_t = -(B_t' H_t B_t + R_t)^-1 B_t' H_t A_t``.
    """
    A, B, Q, R = system.A, system.B, system.Q, system.R
    T, d, m = B.shape
    H = np.zeros((T, d, d))
    F = np.zeros((T, m, d))
    H[T - 1] = _sym(Q[T - 1])
    for t in range(T - 1, -1, -1):
        Ht = H[t]
        S = B[t].T @ Ht @ B[t] + R[t]
        if 1.0 / np.linalg.cond(S) < 1e-12:
            raise NumericalError(f"ill-conditioned LQR step at t={t}")
        K = np.linalg.solve(S, B[t].T @ Ht @ A[t])
        F[t] = -K
        if t > 0:
            H[t - 1] = _sym(Q[t - 1] + A[t].T @ Ht @ A[t] - A[t].T @ Ht @ B[t] @ K)
    return LqrSolution(F, H)


def solve_kalman(system: LinearSystem) -> KalmanSolution:
    """Forward Riccati recursion from ``P_{0|0} = 0``.

    The measurement update uses the gain (Joseph) form, which agrees with the
    information form ``P_{t|t}^-1 = P_{t|t-1}^-1 + C' V^-1 C`` whenever the
    prior is invertible and stays defined when it is not.
    """
    A, C, W, V = system.A, system.C, system.W, system.V
    T, q, d = C.shape
    G = np.zeros((T, d, q))
    prior = np.zeros((T, d, d))
    post = np.zeros((T, d, d))
    eye = np.eye(d)
    for t in range(1, T):
        P = _sym(A[t - 1] @ post[t - 1] @ A[t - 1].T + W[t - 1])
        S = C[t] @ P @ C[t].T + V[t]
        Gt = np.linalg.solve(S, C[t] @ P).T
        J = eye - Gt @ C[t]
        prior[t] = P
        G[t] = Gt
        post[t] = _sym(J @ P @ J.T + Gt @ V[t] @ Gt.T)
    return KalmanSolution(G, prior, post)


def build_closed_loop(
    system: LinearSystem, lqr: LqrSolution, kalman: KalmanSolution
) -> ClosedLoopModel:
    A, B, C, W, V = system.A, system.B, system.C, system.W, system.V
    F, G = lqr.gains, kalman.gains
    T, d, _ = A.shape
    if F.shape[0] != T or G.shape[0] != T:
        raise ValueError("gain sequences do not match the system horizon")
    eye = np.eye(d)
    Abar = np.zeros((T, 2 * d, 2 * d))
    Wbar = np.zeros((T, 2 * d, 2 * d))
    for t in range(T):
        BF = B[t] @ F[t]
        GC = G[t] @ C[t]
        ABF = A[t] + BF
        Abar[t, :d, :d] = A[t] + BF @ GC
        Abar[t, :d, d:] = BF @ (eye - GC)
        Abar[t, d:, :d] = ABF @ GC
        Abar[t, d:, d:] = ABF @ (eye - GC)
        # wbar = [BFG v + w; (A+BF) G v] = L v + [w; 0]
        L = np.vstack([BF @ G[t], ABF @ G[t]])
        Wt = L @ V[t] @ L.T
        Wt[:d, :d] += W[t]
        Wbar[t] = _sym(Wt)
    return ClosedLoopModel(Abar, Wbar)


def synthesize(system: LinearSystem) -> ClosedLoopModel:
    return build_closed_loop(system, solve_lqr(system), solve_kalman(system))


def simulate_coupled(
    system: LinearSystem,
    lqr: LqrSolution,
    kalman: KalmanSolution,
    w: np.ndarray,
    v: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Run deviation dynamics, Kalman filter and LQR feedback step by step.

    ``w`` is (T, d) process noise and ``v`` is (T, q) measurement noise.
    Returns the deviations ``x_t`` and a priori estimates ``xhat_{t|t-1}``
    for t = 0..T, starting from zero.
    """
    A, B, C = system.A, system.B, system.C
    F, G = lqr.gains, kalman.gains
    T, d, _ = A.shape
    x = np.zeros((T + 1, d))
    xhat_prior = np.zeros((T + 1, d))
    for t in range(T):
        y = C[t] @ x[t] + v[t]
        xhat = xhat_prior[t] + G[t] @ (y - C[t] @ xhat_prior[t])
        u = F[t] @ xhat
        x[t + 1] = A[t] @ x[t] + B[t] @ u + w[t]
        xhat_prior[t + 1] = A[t] @ xhat + B[t] @ u
    return x, xhat_prior


def augmented_noise(
    system: LinearSystem, lqr: LqrSolution, kalman: KalmanSolution, w, v
) -> np.ndarray:
    """Map process/measurement noise draws to the augmented noise ``wbar_t``."""
    B, A = system.B, system.A
    F, G = lqr.gains, kalman.gains
    BFG = np.einsum("tij,tjk,tkl->til", B, F, G)
    ABFG = np.einsum("tij,tjk->tik", A + np.einsum("tij,tjk->tik", B, F), G)
    top = np.einsum("tij,tj->ti", BFG, v) + w
    bottom = np.einsum("tij,tj->ti", ABFG, v)
    return np.concatenate([top, bottom], axis=1)
