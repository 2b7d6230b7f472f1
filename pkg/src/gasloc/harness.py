"""Closed-loop trials, batch benchmarks, and result logging.

A trial wires the pieces together: plan a goal from the current posterior,
drive the simulated robot and sensor along the path, fold the new readings
into the measured feature stream, recompute per-hypothesis features and
log-likelihoods over the whole history, update the posterior from the
uniform prior, and check termination.  Feature histories are recomputed
rather than accumulated because rank features reorder every past
measurement whenever new data arrives.

A benchmark sweeps feature kind x sensor condition with paired randomized
source/start draws and writes one JSON record per trial to a line-oriented
log, plus a median/IQR summary.  Logs are deterministic given the config
seed; wall-clock fields are excluded from the determinism comparison.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .features import (FEATURE_KINDS, HypothesisFeatureBank,
                       MeasuredFeatureStream, SortedDataset, feature_rank)
from .planner import (PlanningError, SensorDrive, plan_path, sample_along,
                      select_goal)
from .plume import PlumeCache, estimate_at, estimate_many
from .scenario import Scenario, load_scenario
from .sensor import SENSOR_PRESETS, SensorState
from .ste import (CONTINUE, NoiseModel, check_termination, estimate_source,
                  log_likelihood_many, make_prior, noise_for, update_posterior)
from .world import Environment, ValidationError, cell_center, position_to_cell

SCHEMA_VERSION = 1
SENSOR_CONDITIONS = ("calibrated",) + tuple(SENSOR_PRESETS)
# log fields that vary run to run without affecting results
VOLATILE_RECORD_KEYS = ("wall_seconds",)


def support_cells(env: Environment) -> list[tuple[int, int]]:
    """Hypothesis cells in row-major order (matches mask indexing)."""
    rows, cols = np.nonzero(env.interior_mask())
    return [(int(c), int(r)) for r, c in zip(rows, cols)]


def sensor_condition(label: str, base):
    """Map a condition label to (sensor params, calibrated flag).

    'calibrated' uses the scenario's sensor with calibration applied;
    a preset name runs that sensor raw (uncalibrated voltages).
    """
    if label == "calibrated":
        return base, True
    if label in SENSOR_PRESETS:
        return dataclasses.replace(base, **SENSOR_PRESETS[label]), False
    raise ValidationError(f"unknown sensor condition {label!r}; "
                          f"known: {', '.join(SENSOR_CONDITIONS)}")


@dataclass(frozen=True)
class FeatureSetup:
    """Feature parameters and noise model resolved against concrete fields."""

    params: object  # FeatureParams with d_thres filled in
    noise: NoiseModel
    thresholds: np.ndarray | None  # per-hypothesis fixed-hit thresholds


def resolve_setup(scenario: Scenario, fields: np.ndarray) -> FeatureSetup:
    """Fill data-dependent defaults: the fixed-hit threshold and the noise
    scale of the value feature, both set from the model fields' maximum
    (model knowledge only -- never the true source)."""
    kind = scenario.feature_kind
    fp = scenario.features
    gmax = float(fields.max())
    d_thres = fp.d_thres if fp.d_thres is not None else fp.span_fraction * gmax
    params = dataclasses.replace(fp, d_thres=d_thres)
    if scenario.noise is not None:
        noise = scenario.noise
    elif kind == "value":
        noise = noise_for("value", value_scale=fp.span_fraction * gmax)
    else:
        noise = noise_for(kind)
    thresholds = None
    if kind == "fixed_hit":
        n = fields.shape[0]
        thresholds = np.full(n, d_thres)  # one shared threshold, both sides
    return FeatureSetup(params=params, noise=noise, thresholds=thresholds)


@dataclass
class TrialResult:
    scenario: str
    trial_index: int
    feature: str
    sensor: str
    calibrated: bool
    seed: int
    status: str = "ok"
    error: str | None = None
    iterations_used: int | None = None
    termination_reason: str | None = None
    localization_error_m: float | None = None
    true_cell: tuple[int, int] | None = None
    estimated_cell: tuple[int, int] | None = None
    entropy_trace: list[float] = field(default_factory=list)
    n_measurements: int | None = None
    wall_seconds: float | None = None
    dump: str | None = None

    def to_record(self) -> dict:
        rec = dataclasses.asdict(self)
        rec["record"] = "trial"
        rec["schema_version"] = SCHEMA_VERSION
        if rec["true_cell"] is not None:
            rec["true_cell"] = list(rec["true_cell"])
        if rec["estimated_cell"] is not None:
            rec["estimated_cell"] = list(rec["estimated_cell"])
        return rec


def run_trial(scenario: Scenario, cache: PlumeCache | None = None,
              sensor_label: str | None = None, trial_index: int = 0,
              dump_path: str | Path | None = None) -> TrialResult:
    """Run one full localization trial; returns its metrics.

    ``dump_path`` writes per-iteration posteriors, the robot trajectory,
    and the measurements (with their final empirical ranks) to an .npz
    for offline rendering.
    """
    t0 = time.perf_counter()
    env = scenario.environment
    support = env.interior_mask()
    cells = support_cells(env)
    if cache is None:
        cache = PlumeCache(env, scenario.solver)
    fields = cache.fields_tensor(cells)
    true_field = cache.field(scenario.true_source_cell)
    setup = resolve_setup(scenario, fields)
    params = scenario.sensor_params
    label = sensor_label or ("calibrated" if scenario.calibrated else "uncalibrated")

    root = np.random.SeedSequence(scenario.seed)
    ss_sensor, ss_planner = root.spawn(2)
    state = SensorState.initial(params, np.random.default_rng(ss_sensor))
    planner_seeds = np.random.default_rng(ss_planner).integers(
        0, 2**63, size=scenario.max_iterations)
    drive = SensorDrive(
        params=params, state=state,
        concentration_at=lambda p: float(estimate_at(true_field, env, p)[0]),
        calibrated=scenario.calibrated)

    mstream = MeasuredFeatureStream(scenario.feature_kind, setup.params)
    bank = HypothesisFeatureBank(scenario.feature_kind, setup.params,
                                 len(cells), thresholds=setup.thresholds)
    prior = make_prior(env)
    posterior = prior
    term_cfg = dataclasses.replace(
        scenario.termination, max_iterations=scenario.max_iterations,
    ).resolved(env, len(cells))

    robot_pos = np.asarray(scenario.robot_start, dtype=float)
    visited = {position_to_cell(env, robot_pos)}
    entropy_trace: list[float] = []
    posteriors: list[np.ndarray] = []
    trajectory: list[tuple[float, float]] = [tuple(robot_pos)]
    measurements: list = []
    reason = None
    iteration = 0

    while True:
        iteration += 1
        goal = select_goal(posterior, robot_pos, env, scenario.planner,
                           seed=int(planner_seeds[iteration - 1]), visited=visited)
        try:
            plan = plan_path(env, robot_pos, goal, scenario.planner)
        except PlanningError:
            # goal in a walled-off pocket: fall back to wandering
            goal = cell_center(env, _nearest_reachable(env, robot_pos, visited))
            plan = plan_path(env, robot_pos, goal, scenario.planner)
        batch = sample_along(plan, scenario.sampling_mode, drive,
                             scenario.planner, iteration=iteration)
        measurements.extend(batch)
        positions = np.array([m.position for m in batch])
        values = np.array([m.value for m in batch])
        mstream.append(values)
        bank.append(estimate_many(fields, env, positions))

        ll = log_likelihood_many(mstream.features(), bank.features(), setup.noise)
        ll_grid = np.zeros(env.shape)
        ll_grid[support] = ll
        posterior = update_posterior(prior, ll_grid)
        posterior.validate(support)
        entropy_trace.append(posterior.entropy)
        if dump_path is not None:
            posteriors.append(posterior.probability.copy())
        trajectory.extend(plan.waypoints[1:])
        robot_pos = np.asarray(plan.goal, dtype=float)
        visited.add(position_to_cell(env, robot_pos))

        decision = check_termination(posterior, iteration, term_cfg)
        if decision != CONTINUE:
            reason = decision
            break

    est = estimate_source(posterior)
    err = float(np.linalg.norm(cell_center(env, est)
                               - cell_center(env, scenario.true_source_cell)))
    result = TrialResult(
        scenario=scenario.name, trial_index=trial_index,
        feature=scenario.feature_kind, sensor=label,
        calibrated=scenario.calibrated, seed=scenario.seed,
        iterations_used=iteration, termination_reason=reason,
        localization_error_m=err, true_cell=tuple(scenario.true_source_cell),
        estimated_cell=tuple(est), entropy_trace=entropy_trace,
        n_measurements=len(measurements),
        wall_seconds=time.perf_counter() - t0,
    )
    if dump_path is not None:
        dump_path = Path(dump_path)
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        values_all = np.array([m.value for m in measurements])
        ranks = feature_rank(SortedDataset(values_all), values_all)
        np.savez_compressed(
            dump_path,
            posteriors=np.array(posteriors),
            trajectory=np.array(trajectory),
            measurement_positions=np.array([m.position for m in measurements]),
            measurement_values=values_all,
            measurement_ranks=ranks,
            measurement_iterations=np.array([m.iteration for m in measurements]),
            obstacle_mask=env.obstacle_mask,
            cell_size=env.cell_size,
            wind=np.asarray(env.inlet_wind, dtype=float),
            true_cell=np.array(scenario.true_source_cell),
            estimated_cell=np.array(est),
            entropy_trace=np.array(entropy_trace),
        )
        result.dump = dump_path.name
    return result


def _nearest_reachable(env: Environment, robot_pos, visited):
    """Closest free cell reachable from the robot, preferring unvisited."""
    from collections import deque

    start = position_to_cell(env, robot_pos)
    seen = {start}
    queue = deque([start])
    best_visited = None
    while queue:
        cell = queue.popleft()
        if cell != start:
            if cell not in visited:
                return cell
            if best_visited is None:
                best_visited = cell
        col, row = cell
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (col + dc, row + dr)
            if nxt not in seen and env.in_bounds(nxt) and env.is_free(nxt):
                seen.add(nxt)
                queue.append(nxt)
    if best_visited is not None:
        return best_visited
    raise PlanningError("robot is sealed in; no reachable free cell")


def replay(scenario: Scenario, batches, cache: PlumeCache | None = None):
    """Drive the estimation stack with a fixed measurement stream.

    ``batches`` is a sequence of (positions (P, 2), values (P,)) pairs, one
    per iteration.  No planner or sensor is involved; this isolates the
    feature -> likelihood -> posterior path, e.g. for studying how readout
    transforms affect the posterior.  Returns the per-iteration posteriors.
    """
    env = scenario.environment
    support = env.interior_mask()
    cells = support_cells(env)
    if cache is None:
        cache = PlumeCache(env, scenario.solver)
    fields = cache.fields_tensor(cells)
    setup = resolve_setup(scenario, fields)
    mstream = MeasuredFeatureStream(scenario.feature_kind, setup.params)
    bank = HypothesisFeatureBank(scenario.feature_kind, setup.params,
                                 len(cells), thresholds=setup.thresholds)
    prior = make_prior(env)
    out = []
    for positions, values in batches:
        mstream.append(np.asarray(values, dtype=float))
        bank.append(estimate_many(fields, env, np.asarray(positions, dtype=float)))
        ll = log_likelihood_many(mstream.features(), bank.features(), setup.noise)
        ll_grid = np.zeros(env.shape)
        ll_grid[support] = ll
        posterior = update_posterior(prior, ll_grid)
        posterior.validate(support)
        out.append(posterior)
    return out


# -- benchmark sweeps --------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkConfig:
    scenario: str
    features: tuple[str, ...] = FEATURE_KINDS
    sensors: tuple[str, ...] = SENSOR_CONDITIONS
    trials: int = 10
    seed: int = 0
    min_separation_fraction: float = 0.25
    dump_posteriors: bool = False

    def __post_init__(self):
        for f in self.features:
            if f not in FEATURE_KINDS:
                raise ValidationError(f"features: unknown feature kind {f!r}")
        for s in self.sensors:
            if s not in SENSOR_CONDITIONS:
                raise ValidationError(f"sensors: unknown condition {s!r}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not 0 <= self.min_separation_fraction < 1:
            raise ValidationError("min_separation_fraction must lie in [0, 1)")


def load_benchmark_config(path) -> BenchmarkConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read benchmark config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"benchmark config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict) or "scenario" not in data:
        raise ValidationError("benchmark config must be a mapping with a 'scenario' path")
    scenario_path = (path.parent / data["scenario"]).resolve()
    known = {f.name for f in dataclasses.fields(BenchmarkConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown key(s) in benchmark config: {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k != "scenario"}
    for key in ("features", "sensors"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return BenchmarkConfig(scenario=str(scenario_path), **kwargs)


def draw_trial_layouts(base: Scenario, config: BenchmarkConfig):
    """Paired (source cell, start position, seed) triples, one per trial.

    Drawn once and reused across every feature x sensor condition so the
    conditions see identical tasks.  Source cells come from the hypothesis
    support; starts from free cells at least min_separation_fraction of
    the arena diagonal away.
    """
    env = base.environment
    ss = np.random.SeedSequence(config.seed)
    draw_ss, *trial_ss = ss.spawn(config.trials + 1)
    rng = np.random.default_rng(draw_ss)
    sources = support_cells(env)
    rows, cols = np.nonzero(env.free_mask())
    free = [(int(c), int(r)) for r, c in zip(rows, cols)]
    diag = math.hypot(*env.extent)
    min_sep = config.min_separation_fraction * diag
    layouts = []
    for i in range(config.trials):
        for _ in range(10_000):
            src = sources[int(rng.integers(len(sources)))]
            start_cell = free[int(rng.integers(len(free)))]
            start = cell_center(env, start_cell)
            sep = float(np.linalg.norm(start - cell_center(env, src)))
            if sep >= min_sep:
                break
        else:
            raise ValidationError(
                "could not draw a source/start pair with the required separation")
        seed = int(trial_ss[i].generate_state(1, dtype=np.uint64)[0] % (2**63))
        layouts.append((src, (float(start[0]), float(start[1])), seed))
    return layouts


def _trial_scenario(base: Scenario, feature: str, label: str, layout) -> Scenario:
    src, start, seed = layout
    params, calibrated = sensor_condition(label, base.sensor_params)
    return base.replace(true_source_cell=src, robot_start=start, seed=seed,
                        feature_kind=feature, calibrated=calibrated,
                        sensor_params=params)


_WORKER_CACHES: dict[str, PlumeCache] = {}


def _worker_cache(env: Environment, solver, cache_dir) -> PlumeCache:
    key = env.fingerprint() + "|" + "|".join(solver.fingerprint_fields())
    cache = _WORKER_CACHES.get(key)
    if cache is None:
        cache = PlumeCache(env, solver, directory=cache_dir)
        _WORKER_CACHES[key] = cache
    return cache


def _bench_task(args) -> dict:
    scenario, label, trial_index, cache_dir, dump_path = args
    cache = _worker_cache(scenario.environment, scenario.solver, cache_dir)
    try:
        result = run_trial(scenario, cache=cache, sensor_label=label,
                           trial_index=trial_index, dump_path=dump_path)
    except Exception as exc:  # record the failure, keep the sweep going
        result = TrialResult(
            scenario=scenario.name, trial_index=trial_index,
            feature=scenario.feature_kind, sensor=label,
            calibrated=scenario.calibrated, seed=scenario.seed,
            true_cell=tuple(scenario.true_source_cell),
            status="failed", error=f"{type(exc).__name__}: {exc}")
    return result.to_record()


def run_benchmark(config: BenchmarkConfig, out_dir, workers: int = 1,
                  base: Scenario | None = None) -> Path:
    """Run the full sweep and write results.jsonl + summary.json.

    Returns the path to the line-oriented result log.  Records are written
    sorted by (feature, sensor, trial_index), so reruns with the same seed
    produce identical bytes apart from wall-clock fields.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if base is None:
        base = load_scenario(config.scenario)
    layouts = draw_trial_layouts(base, config)
    cache_dir = out_dir / "plume_cache"
    cache = PlumeCache(base.environment, base.solver, directory=cache_dir)
    cache.prewarm(support_cells(base.environment))  # workers then read from disk

    tasks = []
    for feature in config.features:
        for label in config.sensors:
            for i, layout in enumerate(layouts):
                dump_path = None
                if config.dump_posteriors:
                    dump_path = out_dir / "dumps" / f"{feature}_{label}_{i:03d}.npz"
                tasks.append((_trial_scenario(base, feature, label, layout),
                              label, i, cache_dir, dump_path))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_bench_task, tasks))
    else:
        records = [_bench_task(t) for t in tasks]

    records.sort(key=lambda r: (r["feature"], r["sensor"], r["trial_index"]))
    for rec in records:
        validate_record(rec)
    log_path = out_dir / "results.jsonl"
    with log_path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    summary = summarize(records)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return log_path


def summarize(records) -> dict:
    """Median/IQR of localization error and iterations per condition."""
    conditions = []
    keys = sorted({(r["feature"], r["sensor"]) for r in records})
    for feature, sensor in keys:
        sel = [r for r in records
               if r["feature"] == feature and r["sensor"] == sensor]
        ok = [r for r in records
              if r["feature"] == feature and r["sensor"] == sensor
              and r["status"] == "ok"]
        entry = {"feature": feature, "sensor": sensor,
                 "n": len(sel), "failures": len(sel) - len(ok)}
        if ok:
            err = np.array([r["localization_error_m"] for r in ok])
            its = np.array([r["iterations_used"] for r in ok])
            q25, q50, q75 = np.percentile(err, [25, 50, 75])
            entry["error_median_m"] = float(q50)
            entry["error_iqr_m"] = float(q75 - q25)
            i25, i50, i75 = np.percentile(its, [25, 50, 75])
            entry["iterations_median"] = float(i50)
            entry["iterations_iqr"] = float(i75 - i25)
        conditions.append(entry)
    return {"record": "summary", "schema_version": SCHEMA_VERSION,
            "conditions": conditions}


# -- log IO ------------------------------------------------------------------

_SCHEMA = None


def record_schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        ref = importlib.resources.files("gasloc.schemas") / "trial_record.schema.json"
        _SCHEMA = json.loads(ref.read_text())
    return _SCHEMA


def validate_record(record: dict) -> None:
    import jsonschema

    jsonschema.validate(record, record_schema())


def read_log(path) -> list[dict]:
    records = []
    with Path(path).open() as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
    return records


def canonical_log_bytes(path) -> bytes:
    """Log content with run-to-run volatile fields (wall clock) removed;
    the unit of comparison for reproducibility checks."""
    out = []
    for rec in read_log(path):
        for key in VOLATILE_RECORD_KEYS:
            rec.pop(key, None)
        out.append(json.dumps(rec, sort_keys=True))
    return ("\n".join(out) + "\n").encode()
