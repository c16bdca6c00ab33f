import numpy as np
import pytest

from trajrisk.lqg import ClosedLoopModel
from trajrisk.scenario import LinearSystem, PlannedTrajectory, Scenario


def diag_system(T, a=1.0, b=1.0, c=1.0, w=1.0, v=1.0, q=1.0, r=1.0):
    """Two decoupled copies of a scalar system (state dimension must be >= 2)."""
    eye = np.eye(2)
    return LinearSystem(
        *(np.broadcast_to(x * eye, (T, 2, 2)) for x in (a, b, c, w, v, q, r))
    )


def random_system(rng, T, d=2, m=None, q=None):
    m = d if m is None else m
    q = d if q is None else q

    def psd(n, floor=0.0):
        G = rng.normal(size=(T, n, n))
        return G @ G.transpose(0, 2, 1) / n + floor * np.eye(n)

    return LinearSystem(
        A=np.eye(d) + 0.3 * rng.normal(size=(T, d, d)),
        B=rng.normal(size=(T, d, m)),
        C=rng.normal(size=(T, q, d)),
        W=0.1 * psd(d),
        V=0.1 * psd(q, 0.1),
        Q=psd(d),
        R=psd(m, 0.5),
    )


def consistent_plan(system, rng, x0=None):
    T, d = system.horizon, system.dim
    u = 0.1 * rng.normal(size=(T, system.n_inputs))
    x = np.zeros((T + 1, d))
    x[0] = np.zeros(d) if x0 is None else x0
    for t in range(T):
        x[t + 1] = system.A[t] @ x[t] + system.B[t] @ u[t]
    return PlannedTrajectory(x, u)


def random_walk_model(T, sigma2):
    """Augmented model whose first (position) coordinate is a scalar random walk."""
    A = np.broadcast_to(np.eye(2), (T, 2, 2)).copy()
    W = np.zeros((T, 2, 2))
    W[:, 0, 0] = sigma2
    return ClosedLoopModel(A, W)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_scenario(rng):
    sys_ = random_system(rng, 4)
    return Scenario(sys_, consistent_plan(sys_, rng))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
