"""Multivariate normal orthant probabilities ``P(h >= 0)`` for ``h ~ N(mu, Sigma)``.

One and two dimensions are evaluated in closed form (normal CDF and Owen's T
function).  Higher dimensions use Genz's sequential conditioning over the unit
cube with digitally shifted Sobol points; the spread over independent
shifts gives the error estimate.  Singular covariances are handled through a
pivoted Cholesky factor whose dependent rows become extra limits on the pivot
variables.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri, owens_t
from scipy.stats import qmc

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_POINTS = 2_000_000
N_REPLICATES = 12
DEGENERATE_VAR = 1e-14
PSD_TOL = 1e-10
PIVOT_TOL = 1e-12
_START_POINTS = 64
_CHUNK_ROWS = 1 << 17


class IntegrationError(ValueError):
    pass


Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class OrthantQuery:
    mean: np.ndarray
    cov: np.ndarray
    tolerance: float = DEFAULT_TOLERANCE
    seed: Seed = 0
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        k = mean.shape[0]
        if k == 0:
            raise IntegrationError("orthant query needs at least one dimension")
        if cov.shape != (k, k):
            raise IntegrationError(f"covariance shape {cov.shape} does not match mean ({k},)")
        if not np.allclose(cov, cov.T, rtol=1e-8, atol=1e-14):
            raise IntegrationError("covariance is not symmetric")
        if np.linalg.eigvalsh(0.5 * (cov + cov.T)).min() < -PSD_TOL:
            raise IntegrationError("covariance is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    error: float = 0.0
    n_points: int = 0
    converged: bool = True


@dataclass(frozen=True)
class DefiniteAnswer:
    value: float


def deflate_degenerate(q: OrthantQuery) -> OrthantQuery | DefiniteAnswer:
    """Resolve coordinates whose variance is numerically zero."""
    var = np.diag(q.cov)
    flat = var < DEGENERATE_VAR
    if not flat.any():
        return q
    if np.any(q.mean[flat] < 0.0):
        return DefiniteAnswer(0.0)
    keep = ~flat
    if not keep.any():
        return DefiniteAnswer(1.0)
    return OrthantQuery(
        q.mean[keep], q.cov[np.ix_(keep, keep)], q.tolerance, q.seed, q.max_points
    )


def bivariate_normal_cdf(h: float, k: float, rho: float) -> float:
    """``P(Z1 <= h, Z2 <= k)`` for standard normals with correlation ``rho``."""
    if rho >= 1.0 - 1e-12:
        return float(ndtr(min(h, k)))
    if rho <= -1.0 + 1e-12:
        return float(max(0.0, ndtr(h) - ndtr(-k)))
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / (2.0 * math.pi)
    # Owen's T is singular at a zero argument; the CDF is continuous there.
    if h == 0.0:
        h = math.copysign(1e-300, k)
    if k == 0.0:
        k = math.copysign(1e-300, h)
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    with np.errstate(over="ignore", divide="ignore"):
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
    beta = 0.0 if h * k > 0.0 else 0.5
    val = 0.5 * (ndtr(h) + ndtr(k)) - owens_t(h, ah) - owens_t(k, ak) - beta
    return float(min(1.0, max(0.0, val)))


def _standardize(q: OrthantQuery) -> tuple[np.ndarray, np.ndarray]:
    """Upper limits ``b`` and correlation ``R`` with ``P(h >= 0) = P(z <= b)``."""
    sd = np.sqrt(np.diag(q.cov))
    R = q.cov / np.outer(sd, sd)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return q.mean / sd, R


def _pivoted_factor(b: np.ndarray, R: np.ndarray):
    """Pivoted Cholesky of ``R`` with Genz's ordering heuristic.

    At each step the remaining variable with the smallest expected interval
    probability (given truncated means of the earlier pivots) becomes the next
    pivot.  Returns the permuted limits, the factor and the rank.
    """
    k = b.shape[0]
    b = b.copy()
    R = R.copy()
    L = np.zeros((k, k))
    y = np.zeros(k)
    rank = 0
    for j in range(k):
        var = np.diag(R)[j:] - np.einsum("ij,ij->i", L[j:, :j], L[j:, :j])
        ok = var > PIVOT_TOL
        if not ok.any():
            break
        sd = np.sqrt(np.where(ok, var, 1.0))
        shift = L[j:, :j] @ y[:j]
        score = np.where(ok, ndtr((b[j:] - shift) / sd), np.inf)
        p = j + int(np.argmin(score))
        if p != j:
            b[[j, p]] = b[[p, j]]
            R[[j, p], :] = R[[p, j], :]
            R[:, [j, p]] = R[:, [p, j]]
            L[[j, p], :] = L[[p, j], :]
        pivot = math.sqrt(var[p - j])
        L[j, j] = pivot
        L[j + 1:, j] = (R[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / pivot
        u = (b[j] - L[j, :j] @ y[:j]) / pivot
        mass = ndtr(u)
        y[j] = -math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) / mass if mass > 1e-300 else u
        rank = j + 1
    return b, L[:, :rank], rank


def _limit_groups(L: np.ndarray, rank: int) -> list[np.ndarray]:
    """Rows whose last significant coefficient sits in each pivot column."""
    groups: list[list[int]] = [[c] for c in range(rank)]
    for i in range(rank, L.shape[0]):
        row = np.abs(L[i])
        sig = np.nonzero(row > 1e-9 * row.max())[0]
        groups[int(sig[-1])].append(i)
    return [np.array(g) for g in groups]


def _genz_integrand(U: np.ndarray, b: np.ndarray, L: np.ndarray, groups) -> np.ndarray:
    """Sequential conditioning weight for points ``U`` in the (rank-1)-cube."""
    M = U.shape[0]
    rank = L.shape[1]
    Y = np.empty((rank, M))
    w = np.ones(M)
    hi = np.empty(M)
    lo = np.empty(M)
    tmp = np.empty(M)
    for c, rows in enumerate(groups):
        hi.fill(np.inf)
        lo.fill(-np.inf)
        for i in rows:
            coef = L[i, c]
            if c:
                np.dot(L[i, :c], Y[:c], out=tmp)
                np.subtract(b[i], tmp, out=tmp)
            else:
                tmp.fill(b[i])
            tmp /= coef
            if coef > 0:
                np.minimum(hi, tmp, out=hi)
            else:
                np.maximum(lo, tmp, out=lo)
        e = ndtr(hi)
        d = ndtr(lo)
        e -= d
        np.clip(e, 0.0, None, out=e)
        w *= e
        if c < rank - 1:
            e *= U[:, c]
            e += d
            np.clip(e, 1e-300, 1.0 - 1e-16, out=e)
            ndtri(e, out=Y[c])
    return w


_SOBOL_BITS = 30
_sobol_cache: dict[int, np.ndarray] = {}
_sobol_lock = threading.Lock()


def _sobol_base(dim: int, n: int) -> np.ndarray:
    """First ``n`` unscrambled Sobol points as 30-bit integers (cached per dim)."""
    with _sobol_lock:
        base = _sobol_cache.get(dim)
        if base is None or base.shape[0] < n:
            m = max(12, int(math.ceil(math.log2(max(n, 2)))))
            pts = qmc.Sobol(dim, scramble=False, bits=_SOBOL_BITS).random_base2(m)
            base = (pts * (1 << _SOBOL_BITS)).astype(np.uint32)
            base.setflags(write=False)
            _sobol_cache[dim] = base
    return base


def _shifted_points(start: int, stop: int, shifts: np.ndarray) -> np.ndarray:
    """Digitally shifted Sobol points start..stop-1 for every shift.

    Output shape is (n_shifts * (stop - start), dim), grouped by shift.  The
    one-dimensional rule is additionally folded (baker's transform), which
    periodizes the integrand and speeds up convergence there.
    """
    dim = shifts.shape[1]
    base = _sobol_base(dim, stop)[start:stop]
    x = (base[None, :, :] ^ shifts[:, None, :]).astype(float)
    x = (x + 0.5) / (1 << _SOBOL_BITS)
    if dim == 1:
        x = 1.0 - np.abs(2.0 * x - 1.0)
    return x.reshape(-1, dim)


def _qmc(b, L, groups, rank, q: OrthantQuery) -> ProbabilityEstimate:
    dim = rank - 1
    if dim == 0:
        val = float(_genz_integrand(np.zeros((1, 0)), b, L, groups)[0])
        return ProbabilityEstimate(min(1.0, max(0.0, val)), 0.0, 1, True)
    rng = np.random.default_rng(q.seed)
    shifts = rng.integers(0, 1 << _SOBOL_BITS, size=(N_REPLICATES, dim), dtype=np.uint32)
    sums = np.zeros(N_REPLICATES)
    done = 0
    target = _START_POINTS
    per_rep_cap = max(_START_POINTS, q.max_points // N_REPLICATES)
    while True:
        step = max(1, _CHUNK_ROWS // N_REPLICATES)
        for lo in range(done, target, step):
            hi = min(target, lo + step)
            U = _shifted_points(lo, hi, shifts)
            vals = _genz_integrand(U, b, L, groups).reshape(N_REPLICATES, hi - lo)
            sums += vals.sum(axis=1)
        done = target
        means = sums / done
        value = float(means.mean())
        error = 3.0 * float(means.std(ddof=1)) / math.sqrt(N_REPLICATES)
        if error <= q.tolerance:
            converged = True
            break
        if done >= per_rep_cap:
            converged = False
            break
        target = min(2 * done, per_rep_cap)
    return ProbabilityEstimate(
        min(1.0, max(0.0, value)), error, done * N_REPLICATES, converged
    )


def orthant_probability(q: OrthantQuery, method: str = "auto") -> ProbabilityEstimate:
    """``P(h_1 >= 0, ..., h_k >= 0)``.

    ``method="qmc"`` forces the lattice path even for k <= 2 (used to
    cross-check the closed forms).
    """
    reduced = deflate_degenerate(q)
    if isinstance(reduced, DefiniteAnswer):
        return ProbabilityEstimate(reduced.value, 0.0, 0, True)
    b, R = _standardize(reduced)
    k = b.shape[0]
    if method == "auto":
        if k == 1:
            return ProbabilityEstimate(float(ndtr(b[0])))
        if k == 2:
            return ProbabilityEstimate(bivariate_normal_cdf(b[0], b[1], R[0, 1]))
    elif method != "qmc":
        raise ValueError(f"unknown method {method!r}")
    b, L, rank = _pivoted_factor(b, R)
    groups = _limit_groups(L, rank)
    return _qmc(b, L, groups, rank, reduced)


def orthant(mean, cov, tolerance=DEFAULT_TOLERANCE, seed: Seed = 0,
            max_points=DEFAULT_MAX_POINTS) -> ProbabilityEstimate:
    return orthant_probability(OrthantQuery(mean, cov, tolerance, seed, max_points))
