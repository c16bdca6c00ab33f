"""Bounds on the end-to-end collision probability of LQG-tracked trajectories."""

from .bounds import BoundReport, bounds_from_probabilities, compute_report
from .collision import CollisionProbabilities, all_collision_probs
from .distribution import TrajectoryDistribution, propagate
from .lqg import ClosedLoopModel, synthesize
from .montecarlo import McResult, monte_carlo
from .orthant import OrthantQuery, orthant, orthant_probability
from .pipeline import Evaluation, evaluate
from .scenario import Polytope, Scenario, ScenarioError, load_scenario, save_scenario

__all__ = [
    "BoundReport", "ClosedLoopModel", "CollisionProbabilities", "Evaluation", "McResult",
    "OrthantQuery", "Polytope", "Scenario", "ScenarioError", "TrajectoryDistribution",
    "all_collision_probs", "bounds_from_probabilities", "compute_report", "evaluate",
    "load_scenario", "monte_carlo", "orthant", "orthant_probability", "propagate",
    "save_scenario", "synthesize",
]
