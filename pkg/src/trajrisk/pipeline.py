"""End-to-end evaluation: LQG synthesis, trajectory law, probabilities, bounds."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport, compute_report
from .collision import DEFAULT_SKIP_THRESHOLD, CollisionProbabilities, all_collision_probs
from .distribution import TrajectoryDistribution, propagate
from .lqg import ClosedLoopModel, synthesize
from .montecarlo import McResult, monte_carlo
from .orthant import DEFAULT_TOLERANCE
from .scenario import Scenario


@dataclass
class Evaluation:
    model: ClosedLoopModel
    dist: TrajectoryDistribution
    probs: CollisionProbabilities
    report: BoundReport
    mc: McResult | None = None
    timings: dict | None = None

    def as_dict(self) -> dict:
        cp = self.probs
        iu = np.triu_indices(cp.n_events, k=1)
        doc = {"horizon": cp.n_events - 1} | self.report.as_dict()
        doc["probabilities"] = {
            "p": cp.p.tolist(),
            "p_err": cp.p_err.tolist(),
            "chain_pairs": np.diag(cp.pairs, k=1).tolist(),
            "pairs_evaluated": int((cp.computed[iu] & ~cp.skipped[iu]).sum()),
            "pairs_skipped": int(cp.skipped[iu].sum()),
            "pairs_err_total": float(cp.pairs_err[iu].sum()),
        }
        doc["timings"] = dict(self.timings or {}) | {
            "bound_formulas": self.report.timings,
        }
        if self.mc is not None:
            doc["mc"] = self.mc.as_dict()
            bound_time = self.timings["bounds_total"]
            doc["speedup"] = self.mc.seconds / bound_time if bound_time > 0 else None
        return doc


def evaluate(
    scn: Scenario,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    skip_threshold: float = DEFAULT_SKIP_THRESHOLD,
    threads: int = 1,
    with_mc: int = 0,
    pairs: str = "all",
) -> Evaluation:
    t0 = time.perf_counter()
    model = synthesize(scn.system)
    dist = propagate(model, scn.plan.positions)
    t1 = time.perf_counter()
    probs = all_collision_probs(
        dist, scn.obstacles, skip_threshold=skip_threshold, tolerance=tolerance,
        seed=seed, pairs=pairs, threads=threads,
    )
    t2 = time.perf_counter()
    report = compute_report(probs)
    t3 = time.perf_counter()
    timings = {
        "model": t1 - t0,
        "probabilities": t2 - t1,
        "bounds": t3 - t2,
        "bounds_total": t3 - t0,
    }
    mc = None
    if with_mc:
        mc = monte_carlo(model, scn.plan, scn.obstacles, with_mc, seed)
        timings["mc"] = mc.seconds
    return Evaluation(model, dist, probs, report, mc, timings)
