"""Command-line front end: single trials, benchmark sweeps, plume solves.

Exit codes: 0 success, 2 configuration/validation problems, 3 runtime
failures (solver non-convergence, unreachable goals, degenerate
posteriors), 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (load_benchmark_config, run_benchmark, run_trial,
                      sensor_condition)
from .planner import PlanningError
from .plume import PlumeCache, SolverError
from .scenario import load_scenario
from .ste import EstimationError
from .world import ValidationError

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasloc",
        description="Grid-based gas source localization trials and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single localization trial")
    run.add_argument("--scenario", required=True, help="scenario YAML path")
    run.add_argument("--feature", choices=["value", "fixed_hit", "adaptive_hit", "rank"],
                     help="override the scenario's gas feature")
    run.add_argument("--sensor", choices=["calibrated", "sensor_I", "sensor_II"],
                     help="override the sensor condition")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--dump-posteriors", metavar="PATH",
                     help="write per-iteration posteriors and the trajectory to this .npz")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="run a feature x sensor benchmark sweep")
    bench.add_argument("--config", required=True, help="benchmark config YAML")
    bench.add_argument("--out", required=True, help="output directory for logs")
    bench.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    bench.set_defaults(func=cmd_bench)

    solve = sub.add_parser("solve-plume",
                           help="solve and save one source hypothesis field")
    solve.add_argument("--scenario", required=True, help="scenario YAML path")
    solve.add_argument("--source", required=True, metavar="COL,ROW",
                       help="source cell, e.g. 12,5")
    solve.add_argument("--out", required=True, help="output .npz path")
    solve.set_defaults(func=cmd_solve_plume)
    return parser


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    changes = {}
    if args.feature:
        changes["feature_kind"] = args.feature
    if args.seed is not None:
        changes["seed"] = args.seed
    label = None
    if args.sensor:
        label = args.sensor
        params, calibrated = sensor_condition(args.sensor, scenario.sensor_params)
        changes["sensor_params"] = params
        changes["calibrated"] = calibrated
    if changes:
        scenario = scenario.replace(**changes)
    result = run_trial(scenario, sensor_label=label,
                       dump_path=args.dump_posteriors)
    json.dump(result.to_record(), sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_bench(args) -> int:
    config = load_benchmark_config(args.config)
    log_path = run_benchmark(config, args.out, workers=max(args.workers, 1))
    sys.stdout.write(f"wrote {log_path}\n")
    return 0


def cmd_solve_plume(args) -> int:
    scenario = load_scenario(args.scenario)
    try:
        col, row = (int(p) for p in args.source.split(","))
    except ValueError:
        raise ValidationError(f"--source must be COL,ROW integers; got {args.source!r}")
    cache = PlumeCache(scenario.environment, scenario.solver)
    fld = cache.field((col, row))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(out, concentration=fld.concentration,
                        source_cell=np.array(fld.source_cell),
                        residual=fld.solver_residual, sweeps=fld.sweeps,
                        cell_size=scenario.environment.cell_size,
                        solver=json.dumps(dataclasses.asdict(scenario.solver)))
    sys.stdout.write(f"wrote {out} (residual {fld.solver_residual:.2e}, "
                     f"{fld.sweeps} sweeps)\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, PlanningError, EstimationError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
