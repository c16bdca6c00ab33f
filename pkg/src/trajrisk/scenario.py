"""Problem instances: linear system, planned trajectory, polyhedral obstacles.

Scenario files are single JSON documents::

    {
      "system": {"time_invariant": true, "A": [[...]], "B": ..., "C": ...,
                 "W": ..., "V": ..., "Q": ..., "R": ...},
      "plan": {"positions": [[...], ...], "inputs": [[...], ...]},
      "obstacles": [{"A": [[...], ...], "b": [...]}, ...],
      "bbox": {"lower": [...], "upper": [...]},            # optional
      "waypoints": {"points": [[...], ...], "steps_per_segment": 4,
                    "z_scale": 0.001, "dt": 1.0}            # optional
    }

Each system matrix is either a single 2-D array (broadcast to every step) or a
list of ``T`` per-step 2-D arrays.  ``"time_invariant": true`` requires the
former for every key.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

MATRIX_KEYS = ("A", "B", "C", "W", "V", "Q", "R")
NORMAL_TOL = 1e-9
DYNAMICS_TOL = 1e-9
PSD_TOL = 1e-10


class ScenarioError(ValueError):
    """Invalid scenario: bad schema, dimensions, or a violated invariant."""


def _frozen(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    if not np.allclose(m, m.T, atol=1e-12, rtol=1e-9):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (m + m.T)).min() >= -tol)


def _is_pd(m: np.ndarray) -> bool:
    if not np.allclose(m, m.T, atol=1e-12, rtol=1e-9):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (m + m.T)).min() > 0.0)


@dataclass(frozen=True)
class LinearSystem:
    """Per-step matrices stacked along axis 0, each of length ``T``."""

    A: np.ndarray  # (T, d, d)
    B: np.ndarray  # (T, d, m)
    C: np.ndarray  # (T, q, d)
    W: np.ndarray  # (T, d, d)
    V: np.ndarray  # (T, q, q)
    Q: np.ndarray  # (T, d, d)
    R: np.ndarray  # (T, m, m)

    def __post_init__(self):
        for key in MATRIX_KEYS:
            object.__setattr__(self, key, _frozen(getattr(self, key)))
        self.validate()

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[2]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[1]

    def validate(self) -> None:
        T = self.A.shape[0] if self.A.ndim == 3 else 0
        if T < 1:
            raise ScenarioError("horizon T must be >= 1")
        for key in MATRIX_KEYS:
            arr = getattr(self, key)
            if arr.ndim != 3 or arr.shape[0] != T:
                raise ScenarioError(
                    f"dimension mismatch: {key} has shape {arr.shape}, "
                    f"expected {T} stacked matrices"
                )
            if not np.all(np.isfinite(arr)):
                raise ScenarioError(f"{key} contains non-finite entries")
        d, m, q = self.A.shape[1], self.B.shape[2], self.C.shape[1]
        if d < 2:
            raise ScenarioError("state dimension d must be >= 2")
        expected = {
            "A": (d, d), "B": (d, m), "C": (q, d), "W": (d, d),
            "V": (q, q), "Q": (d, d), "R": (m, m),
        }
        for key, shape in expected.items():
            if getattr(self, key).shape[1:] != shape:
                raise ScenarioError(
                    f"dimension mismatch: {key} is {getattr(self, key).shape[1:]}, "
                    f"expected {shape}"
                )
        for t in range(T):
            for key in ("W", "Q"):
                if not _is_psd(getattr(self, key)[t]):
                    raise ScenarioError(f"{key}[{t}] is not symmetric positive semidefinite")
            for key in ("V", "R"):
                if not _is_pd(getattr(self, key)[t]):
                    raise ScenarioError(f"{key}[{t}] is not symmetric positive definite")


@dataclass(frozen=True)
class PlannedTrajectory:
    positions: np.ndarray  # (T+1, d)
    inputs: np.ndarray  # (T, m)

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "inputs", _frozen(self.inputs))
        if self.positions.ndim != 2 or self.inputs.ndim != 2:
            raise ScenarioError("plan positions and inputs must be 2-D arrays")
        if self.positions.shape[0] != self.inputs.shape[0] + 1:
            raise ScenarioError(
                f"plan has {self.positions.shape[0]} positions and "
                f"{self.inputs.shape[0]} inputs; expected T+1 and T"
            )

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    def dynamics_residual(self, system: LinearSystem) -> float:
        """Largest deviation from ``x[t+1] = A x[t] + B u[t]`` along the plan."""
        x, u = self.positions, self.inputs
        pred = np.einsum("tij,tj->ti", system.A, x[:-1]) + np.einsum(
            "tij,tj->ti", system.B, u
        )
        return float(np.abs(pred - x[1:]).max())


@dataclass(frozen=True)
class Polytope:
    """``{x : a_i . x >= b_i for all i}``; rows of ``normals`` point inward."""

    normals: np.ndarray  # (I, d)
    offsets: np.ndarray  # (I,)

    def __post_init__(self):
        object.__setattr__(self, "normals", _frozen(np.atleast_2d(self.normals)))
        object.__setattr__(self, "offsets", _frozen(np.atleast_1d(self.offsets)))
        if self.normals.shape[0] < 1:
            raise ScenarioError("polytope needs at least one constraint")
        if self.offsets.shape != (self.normals.shape[0],):
            raise ScenarioError(
                f"polytope has {self.normals.shape[0]} normals but "
                f"{self.offsets.shape[0]} offsets"
            )
        norms = np.linalg.norm(self.normals, axis=1)
        if np.any(np.abs(norms - 1.0) > NORMAL_TOL):
            raise ScenarioError(
                f"obstacle normals must have unit length (got norms {norms.tolist()})"
            )

    @classmethod
    def from_halfspaces(cls, A, b, normalize: bool = False) -> "Polytope":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if normalize:
            norms = np.linalg.norm(A, axis=1)
            if np.any(norms == 0.0):
                raise ScenarioError("obstacle has a zero normal vector")
            A = A / norms[:, None]
            b = b / norms
        return cls(A, b)

    @classmethod
    def from_vertices(cls, vertices) -> "Polytope":
        """Convex polygon (d = 2) from its vertices in counter-clockwise order."""
        v = np.asarray(vertices, dtype=float)
        e = np.roll(v, -1, axis=0) - v
        inward = np.column_stack([-e[:, 1], e[:, 0]])
        inward /= np.linalg.norm(inward, axis=1)[:, None]
        return cls(inward, np.einsum("ij,ij->i", inward, v))

    @classmethod
    def box(cls, lower, upper) -> "Polytope":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([lower, -upper]))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.normals.shape[0]

    def margins(self, x: np.ndarray) -> np.ndarray:
        """Signed constraint values ``a_i . x - b_i`` for points ``x`` (..., d)."""
        return np.asarray(x) @ self.normals.T - self.offsets

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Boundary counts as inside."""
        return self.margins(x).min(axis=-1) >= 0.0

    def chebyshev_center(self, lower=None, upper=None) -> np.ndarray | None:
        """Center of the largest inscribed ball, or None if empty or unbounded."""
        d = self.dim
        # maximize r s.t. a_i.x - r >= b_i  ->  -a_i.x + r <= -b_i
        A_ub = np.hstack([-self.normals, np.ones((self.n_constraints, 1))])
        b_ub = -self.offsets
        lo = -1e6 * np.ones(d) if lower is None else np.asarray(lower, dtype=float)
        hi = 1e6 * np.ones(d) if upper is None else np.asarray(upper, dtype=float)
        bounds = list(zip(lo, hi)) + [(0.0, None)]
        c = np.zeros(d + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status != 0 or res.x[-1] <= 0.0:
            return None
        return res.x[:d]


@dataclass(frozen=True)
class WaypointSpec:
    """How a ground-robot plan was generated, kept so it can be re-discretized."""

    points: np.ndarray  # (K, 2)
    steps_per_segment: int
    z_scale: float
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))


@dataclass(frozen=True)
class Scenario:
    system: LinearSystem
    plan: PlannedTrajectory
    obstacles: tuple[Polytope, ...] = ()
    bbox: tuple[np.ndarray, np.ndarray] | None = None
    waypoints: WaypointSpec | None = None
    strict: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.bbox is not None:
            object.__setattr__(
                self, "bbox", (_frozen(self.bbox[0]), _frozen(self.bbox[1]))
            )
        self.validate()

    @property
    def horizon(self) -> int:
        return self.system.horizon

    @property
    def dim(self) -> int:
        return self.system.dim

    def validate(self) -> None:
        sys_, plan = self.system, self.plan
        if plan.horizon != sys_.horizon:
            raise ScenarioError(
                f"dimension mismatch: plan has T={plan.horizon}, system has T={sys_.horizon}"
            )
        if plan.positions.shape[1] != sys_.dim:
            raise ScenarioError("dimension mismatch: plan positions vs state dimension")
        if plan.inputs.shape[1] != sys_.n_inputs:
            raise ScenarioError("dimension mismatch: plan inputs vs input dimension")
        for l, poly in enumerate(self.obstacles):
            if poly.dim != sys_.dim:
                raise ScenarioError(f"dimension mismatch: obstacle {l} lives in R^{poly.dim}")
        x0 = plan.positions[0]
        for l, poly in enumerate(self.obstacles):
            if bool(poly.contains(x0)):
                raise ScenarioError(f"start inside obstacle {l}")
        self._check_disjoint()
        residual = plan.dynamics_residual(sys_)
        if residual > DYNAMICS_TOL:
            msg = f"planned trajectory violates the dynamics by {residual:.3g}"
            if self.strict:
                raise ScenarioError(msg)
            warnings.warn(msg, stacklevel=3)

    def _check_disjoint(self) -> None:
        lo, hi = (None, None) if self.bbox is None else self.bbox
        centers = [poly.chebyshev_center(lo, hi) for poly in self.obstacles]
        for l, c in enumerate(centers):
            if c is None:
                continue
            for m, other in enumerate(self.obstacles):
                if m != l and bool(other.contains(c)):
                    raise ScenarioError(
                        f"obstacles {l} and {m} overlap (center of {l} lies inside {m})"
                    )


def _matrix_sequence(name: str, raw: Any, T: int, time_invariant: bool) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 2:
        return np.broadcast_to(arr, (T,) + arr.shape).copy()
    if arr.ndim == 3:
        if time_invariant:
            raise ScenarioError(f"system.{name}: time_invariant requires a single matrix")
        if arr.shape[0] != T:
            raise ScenarioError(
                f"dimension mismatch: system.{name} has {arr.shape[0]} steps, expected {T}"
            )
        return arr
    raise ScenarioError(f"system.{name}: expected a matrix or a list of matrices")


def scenario_from_dict(
    doc: dict, normalize: bool = False, strict: bool = False
) -> Scenario:
    try:
        sys_doc = doc["system"]
        plan_doc = doc["plan"]
        positions = np.asarray(plan_doc["positions"], dtype=float)
        inputs = np.asarray(plan_doc["inputs"], dtype=float)
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"plan: {exc}") from None
    if inputs.ndim == 1 and inputs.size == 0:
        inputs = inputs.reshape(0, 0)
    T = int(sys_doc.get("horizon", inputs.shape[0]))
    time_invariant = bool(sys_doc.get("time_invariant", False))
    mats = {}
    for key in MATRIX_KEYS:
        if key not in sys_doc:
            raise ScenarioError(f"missing field system.{key}")
        try:
            mats[key] = _matrix_sequence(key, sys_doc[key], T, time_invariant)
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"system.{key}: {exc}") from None
    obstacles = []
    for l, obs in enumerate(doc.get("obstacles", [])):
        try:
            obstacles.append(Polytope.from_halfspaces(obs["A"], obs["b"], normalize))
        except KeyError as exc:
            raise ScenarioError(f"obstacles[{l}]: missing field {exc}") from None
        except ScenarioError as exc:
            raise ScenarioError(f"obstacles[{l}]: {exc}") from None
    bbox = None
    if doc.get("bbox") is not None:
        bbox = (np.asarray(doc["bbox"]["lower"], float), np.asarray(doc["bbox"]["upper"], float))
    wp = None
    if doc.get("waypoints") is not None:
        w = doc["waypoints"]
        wp = WaypointSpec(
            np.asarray(w["points"], float), int(w["steps_per_segment"]), float(w["z_scale"]),
            float(w.get("dt", 1.0)),
        )
    return Scenario(
        LinearSystem(**mats),
        PlannedTrajectory(positions, inputs),
        tuple(obstacles),
        bbox=bbox,
        waypoints=wp,
        strict=strict,
    )


def scenario_to_dict(scn: Scenario) -> dict:
    sys_ = scn.system
    doc = {
        "system": {"time_invariant": False, "horizon": sys_.horizon}
        | {key: getattr(sys_, key).tolist() for key in MATRIX_KEYS},
        "plan": {
            "positions": scn.plan.positions.tolist(),
            "inputs": scn.plan.inputs.tolist(),
        },
        "obstacles": [
            {"A": p.normals.tolist(), "b": p.offsets.tolist()} for p in scn.obstacles
        ],
    }
    if scn.bbox is not None:
        doc["bbox"] = {"lower": scn.bbox[0].tolist(), "upper": scn.bbox[1].tolist()}
    if scn.waypoints is not None:
        doc["waypoints"] = {
            "points": scn.waypoints.points.tolist(),
            "steps_per_segment": scn.waypoints.steps_per_segment,
            "z_scale": scn.waypoints.z_scale,
            "dt": scn.waypoints.dt,
        }
    return doc


def load_scenario(path, normalize: bool = False, strict: bool = False) -> Scenario:
    """Read and validate a scenario file.

    ``normalize`` rescales non-unit obstacle normals (and their offsets)
    instead of rejecting them; ``strict`` turns the plan/dynamics consistency
    warning into an error.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return scenario_from_dict(doc, normalize=normalize, strict=strict)


def save_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scn), indent=1))


def interpolate_waypoints(points, steps_per_segment: int) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    alphas = np.arange(steps_per_segment) / steps_per_segment
    rows = [p + alphas[:, None] * (q - p) for p, q in zip(points[:-1], points[1:])]
    rows.append(points[-1:])
    return np.vstack(rows)


def make_ground_robot_scenario(
    waypoints: Sequence[Sequence[float]],
    steps_per_segment: int,
    z_scale: float,
    obstacles: Sequence[Polytope] = (),
    dt: float = 1.0,
) -> Scenario:
    """Single-integrator robot in the unit square following straight segments.

    Process noise grows with distance travelled: ``W_t = |dx_t| * z_scale * I``.
    Measurement noise is ``z_scale / dt * I`` and the cost weights are
    ``Q = dt * I``, ``R = I / dt``.  ``dt`` is the sampling period relative to
    the base discretization; at ``dt = 1`` these are ``z_scale * I`` and
    identities.  Scaling them this way keeps the sampled system consistent
    with one continuous-time model when the plan is re-discretized.
    """
    points = np.asarray(waypoints, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 2:
        raise ScenarioError("need at least 2 waypoints in R^2")
    if np.any(points < 0.0) or np.any(points > 1.0):
        raise ScenarioError("waypoints must lie in the unit square")
    if steps_per_segment < 1:
        raise ScenarioError("steps_per_segment must be >= 1")
    if z_scale <= 0.0:
        raise ScenarioError("z_scale must be positive")
    if not dt > 0.0:
        raise ScenarioError("dt must be positive")
    x = interpolate_waypoints(points, steps_per_segment)
    u = np.diff(x, axis=0)
    T = u.shape[0]
    eye = np.eye(2)
    step_len = np.linalg.norm(u, axis=1)
    system = LinearSystem(
        A=np.broadcast_to(eye, (T, 2, 2)),
        B=np.broadcast_to(eye, (T, 2, 2)),
        C=np.broadcast_to(eye, (T, 2, 2)),
        W=step_len[:, None, None] * z_scale * eye,
        V=np.broadcast_to(z_scale / dt * eye, (T, 2, 2)),
        Q=np.broadcast_to(dt * eye, (T, 2, 2)),
        R=np.broadcast_to(eye / dt, (T, 2, 2)),
    )
    return Scenario(
        system,
        PlannedTrajectory(x, u),
        tuple(obstacles),
        bbox=(np.zeros(2), np.ones(2)),
        waypoints=WaypointSpec(points, steps_per_segment, z_scale, dt),
    )


def refine(scn: Scenario, factor: int, rescale: bool = True) -> Scenario:
    """Re-discretize a waypoint scenario with ``factor`` times more steps.

    With ``rescale`` the sampling period shrinks by ``factor`` (see
    :func:`make_ground_robot_scenario`); without it only ``W_t`` follows the
    new step lengths and ``V``, ``Q``, ``R`` keep their per-step values.
    """
    if scn.waypoints is None:
        raise ScenarioError("sweep requires waypoint plan")
    if factor < 1:
        raise ScenarioError("refinement factor must be >= 1")
    wp = scn.waypoints
    dt = wp.dt / factor if rescale else wp.dt
    return make_ground_robot_scenario(
        wp.points, wp.steps_per_segment * factor, wp.z_scale, scn.obstacles, dt
    )
