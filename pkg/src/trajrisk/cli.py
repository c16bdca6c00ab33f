"""Command-line front-end.

    trajrisk evaluate scenario.json [--with-mc N] [-o report.json] [--csv row.csv]
    trajrisk mc scenario.json -n 100000 [--seed S]
    trajrisk sweep scenario.json --factors 1,2,4,8 [--with-mc N] [-o sweep.csv]
    trajrisk gen-fixture [-o fixture.json] [--waypoints "x,y;x,y;..."] [--box x0,y0,x1,y1]
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .collision import DEFAULT_SKIP_THRESHOLD
from .fixtures import Z_SCALE, demo_scenario, random_scenario
from .lqg import synthesize
from .montecarlo import monte_carlo
from .orthant import DEFAULT_TOLERANCE
from .pipeline import evaluate
from .scenario import (
    Polytope,
    ScenarioError,
    load_scenario,
    make_ground_robot_scenario,
    refine,
    save_scenario,
)

log = logging.getLogger("trajrisk")

SWEEP_COLUMNS = (
    "factor", "steps", "boole", "kwerel", "kounias", "hunter_opt", "hunter_chain",
    "frechet", "bonferroni2", "dawson", "mc", "mc_se",
)
EVALUATE_COLUMNS = ("scenario",) + SWEEP_COLUMNS[1:] + ("bounds_seconds", "mc_seconds")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for QMC shifts and MC draws")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help="absolute tolerance per orthant integral")
    p.add_argument("--skip-threshold", type=float, default=DEFAULT_SKIP_THRESHOLD)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--normalize", action="store_true",
                   help="rescale non-unit obstacle normals instead of failing")
    p.add_argument("--strict", action="store_true",
                   help="reject plans that violate the dynamics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajrisk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="compute all bounds for a scenario")
    ev.add_argument("scenario")
    _common(ev)
    ev.add_argument("--with-mc", type=int, default=0, metavar="N")
    ev.add_argument("-o", "--output", help="JSON report path (default: stdout)")
    ev.add_argument("--csv", help="append a one-row CSV summary to this path")

    mc = sub.add_parser("mc", help="Monte Carlo estimate only")
    mc.add_argument("scenario")
    mc.add_argument("-n", type=int, default=100_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--normalize", action="store_true")
    mc.add_argument("--strict", action="store_true")
    mc.add_argument("-o", "--output")

    sw = sub.add_parser("sweep", help="bounds under time-discretization refinement")
    sw.add_argument("scenario")
    sw.add_argument("--factors", default="1,2,4,8")
    _common(sw)
    sw.add_argument("--with-mc", type=int, default=0, metavar="N")
    sw.add_argument("--fixed-weights", action="store_true",
                    help="keep V, Q, R per step instead of rescaling them with the step rate")
    sw.add_argument("-o", "--output", help="CSV path (default: stdout)")

    gen = sub.add_parser("gen-fixture", help="write a ground-robot scenario file")
    gen.add_argument("-o", "--output", help="path (default: stdout)")
    gen.add_argument("--waypoints", help='e.g. "0.1,0.1;0.9,0.9"')
    gen.add_argument("--steps-per-segment", type=int, default=10)
    gen.add_argument("--z-scale", type=float, default=Z_SCALE)
    gen.add_argument("--dt", type=float, default=1.0, help="sampling period of the base plan")
    gen.add_argument("--box", action="append", default=[], metavar="X0,Y0,X1,Y1",
                     help="axis-aligned obstacle (repeatable)")
    gen.add_argument("--random", type=int, metavar="SEED",
                     help="random environment with this seed")
    return parser


def _parse_factors(text: str) -> list[int]:
    try:
        factors = sorted({int(f) for f in text.split(",") if f.strip()})
    except ValueError:
        raise ScenarioError(f"bad factor list {text!r}") from None
    if not factors or factors[0] < 1:
        raise ScenarioError("factors must be positive integers")
    return factors


def _row(ev, extra: dict) -> dict:
    r = ev.report
    row = dict(extra)
    row.update(
        steps=r.n_events - 1, boole=r.boole, kwerel=r.kwerel, kounias=r.kounias,
        hunter_opt=r.hunter_opt, hunter_chain=r.hunter_chain, frechet=r.frechet,
        bonferroni2=r.bonferroni2, dawson=r.dawson,
        mc="" if ev.mc is None else ev.mc.estimate,
        mc_se="" if ev.mc is None else ev.mc.std_error,
    )
    return row


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(columns, rows, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    if header:
        w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def cmd_evaluate(args) -> int:
    scn = load_scenario(args.scenario, normalize=args.normalize, strict=args.strict)
    ev = evaluate(
        scn, seed=args.seed, tolerance=args.tolerance, skip_threshold=args.skip_threshold,
        threads=args.threads, with_mc=args.with_mc,
    )
    doc = {"scenario": str(args.scenario), "seed": args.seed, "tolerance": args.tolerance,
           "skip_threshold": args.skip_threshold} | ev.as_dict()
    text = json.dumps(doc, indent=1) + "\n"
    if args.csv:
        row = _row(ev, {"scenario": str(args.scenario)})
        row["bounds_seconds"] = ev.timings["bounds_total"]
        row["mc_seconds"] = "" if ev.mc is None else ev.mc.seconds
        path = Path(args.csv)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a") as fh:
            fh.write(_csv_text(EVALUATE_COLUMNS, [row], header=new))
    _write(text, args.output)
    return 0


def cmd_mc(args) -> int:
    if args.n < 1:
        raise ScenarioError("-n must be >= 1")
    scn = load_scenario(args.scenario, normalize=args.normalize, strict=args.strict)
    res = monte_carlo(synthesize(scn.system), scn.plan, scn.obstacles, args.n, args.seed)
    print(f"p_hat={res.estimate!r} se={res.std_error!r} n={res.n_samples} "
          f"time={res.seconds:.3f}s")
    if args.output:
        Path(args.output).write_text(json.dumps(res.as_dict(), indent=1) + "\n")
    return 0


def run_sweep(scn, factors, seed=0, tolerance=DEFAULT_TOLERANCE,
              skip_threshold=DEFAULT_SKIP_THRESHOLD, threads=1, with_mc=0,
              rescale=True) -> list[dict]:
    if scn.waypoints is None:
        raise ScenarioError("sweep requires waypoint plan")
    rows = []
    for f in factors:
        refined = scn if f == 1 else refine(scn, f, rescale)
        ev = evaluate(refined, seed=seed, tolerance=tolerance, skip_threshold=skip_threshold,
                      threads=threads, with_mc=with_mc)
        rows.append(_row(ev, {"factor": f}))
        log.info("factor %d: %d steps, boole %.4f", f, refined.horizon, ev.report.boole)
    return rows


def cmd_sweep(args) -> int:
    scn = load_scenario(args.scenario, normalize=args.normalize, strict=args.strict)
    rows = run_sweep(scn, _parse_factors(args.factors), args.seed, args.tolerance,
                     args.skip_threshold, args.threads, args.with_mc,
                     rescale=not args.fixed_weights)
    _write(_csv_text(SWEEP_COLUMNS, rows), args.output)
    return 0


def cmd_gen_fixture(args) -> int:
    if args.random is not None:
        scn = random_scenario(np.random.default_rng(args.random), z_scale=args.z_scale)
    elif args.waypoints:
        pts = [[float(v) for v in p.split(",")] for p in args.waypoints.split(";")]
        boxes = []
        for spec in args.box:
            x0, y0, x1, y1 = (float(v) for v in spec.split(","))
            boxes.append(Polytope.box((x0, y0), (x1, y1)))
        scn = make_ground_robot_scenario(pts, args.steps_per_segment, args.z_scale, boxes,
                                         args.dt)
    else:
        scn = demo_scenario(args.steps_per_segment)
    if args.output:
        save_scenario(scn, args.output)
    else:
        from .scenario import scenario_to_dict

        sys.stdout.write(json.dumps(scenario_to_dict(scn), indent=1) + "\n")
    return 0


COMMANDS = {
    "evaluate": cmd_evaluate,
    "mc": cmd_mc,
    "sweep": cmd_sweep,
    "gen-fixture": cmd_gen_fixture,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
