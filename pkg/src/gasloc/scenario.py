"""Trial configuration: the environment plus everything a run needs.

Scenario files are YAML with nested sections (grid, source, robot, sensor,
estimation, plus optional solver/features/noise/termination/planner
overrides).  Obstacles are axis-aligned rectangles in meters, rasterized
onto the grid at load time; a cell is occupied when its center falls inside
a rectangle.  See scenarios/ for annotated examples and the schema walk-
through in the README.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .features import FEATURE_KINDS, FeatureParams
from .planner import SAMPLING_MODES, PlannerConfig
from .plume import SolverParams
from .sensor import SENSOR_PRESETS, SensorParams, sensor_preset
from .ste import NoiseModel, TerminationConfig
from .world import (Cell, Environment, ValidationError, position_to_cell,
                    rasterize_rectangles)

Rect = tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


@dataclass(frozen=True)
class Scenario:
    name: str
    environment: Environment
    true_source_cell: Cell
    robot_start: tuple[float, float]
    sensor_params: SensorParams
    feature_kind: str = "rank"
    calibrated: bool = True
    max_iterations: int = 30
    sampling_mode: str = "sense_in_motion"
    seed: int = 0
    obstacle_rects: tuple[Rect, ...] = ()
    solver: SolverParams = field(default_factory=SolverParams)
    features: FeatureParams = field(default_factory=FeatureParams)
    noise: NoiseModel | None = None  # None: per-feature default at run time
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)

    def __post_init__(self):
        if self.feature_kind not in FEATURE_KINDS:
            raise ValidationError(
                f"feature_kind {self.feature_kind!r} not one of {FEATURE_KINDS}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ValidationError(
                f"sampling_mode {self.sampling_mode!r} not one of {SAMPLING_MODES}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        env = self.environment
        cell = tuple(int(c) for c in self.true_source_cell)
        object.__setattr__(self, "true_source_cell", cell)
        if not env.in_bounds(cell) or not env.is_free(cell):
            raise ValidationError(f"true_source_cell {cell} is not a free cell")
        start = (float(self.robot_start[0]), float(self.robot_start[1]))
        object.__setattr__(self, "robot_start", start)
        start_cell = position_to_cell(env, start)  # raises if out of bounds
        if not env.is_free(start_cell):
            raise ValidationError(f"robot_start {start} lies in occupied cell {start_cell}")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ValidationError(f"scenario is missing {where}.{key}" if where else
                              f"scenario is missing {key}")
    return section[key]


def _sub(data: dict, key: str) -> dict:
    value = data.get(key, {}) or {}
    if not isinstance(value, dict):
        raise ValidationError(f"section {key!r} must be a mapping")
    return value


def _build_dataclass(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {where}")
    try:
        return cls(**data)
    except TypeError as exc:  # missing required field
        raise ValidationError(f"section {where}: {exc}") from exc


def scenario_from_dict(data: dict) -> Scenario:
    """Build and validate a Scenario from parsed file content."""
    if not isinstance(data, dict):
        raise ValidationError("scenario file must contain a mapping at top level")
    grid = _sub(data, "grid")
    for key in ("width_cells", "height_cells", "cell_size"):
        _require(grid, key, "grid")
    rects = tuple(tuple(float(v) for v in r) for r in grid.get("obstacles", ()) or ())
    for i, r in enumerate(rects):
        if len(r) != 4 or r[0] >= r[2] or r[1] >= r[3]:
            raise ValidationError(
                f"grid.obstacles[{i}] must be [xmin, ymin, xmax, ymax] with min < max")
    try:
        mask = rasterize_rectangles(int(grid["width_cells"]), int(grid["height_cells"]),
                                    float(grid["cell_size"]), rects)
    except (TypeError, OverflowError) as exc:
        raise ValidationError(f"grid dimensions invalid: {exc}") from exc
    wind = grid.get("wind", (0.0, 0.0))
    env = Environment(
        width_cells=int(grid["width_cells"]),
        height_cells=int(grid["height_cells"]),
        cell_size=float(grid["cell_size"]),
        obstacle_mask=mask,
        inlet_wind=np.asarray(wind, dtype=float),
        seed=int(data.get("seed", 0)),
    )

    source = _sub(data, "source")
    cell = _require(source, "cell", "source")
    if not (isinstance(cell, (list, tuple)) and len(cell) == 2):
        raise ValidationError("source.cell must be [col, row]")

    robot = _sub(data, "robot")
    start = _require(robot, "start", "robot")
    if not (isinstance(start, (list, tuple)) and len(start) == 2):
        raise ValidationError("robot.start must be [x, y] in meters")

    sensor = _sub(data, "sensor")
    overrides = _sub(sensor, "overrides")
    if "preset" in sensor:
        name = sensor["preset"]
        if name not in SENSOR_PRESETS:
            raise ValidationError(
                f"sensor.preset {name!r} not one of {sorted(SENSOR_PRESETS)}")
        params = sensor_preset(name, **overrides)
    else:
        params = _build_dataclass(SensorParams, overrides, "sensor.overrides")

    est = _sub(data, "estimation")
    noise_data = _sub(est, "noise")
    noise = _build_dataclass(NoiseModel, noise_data, "estimation.noise") if noise_data else None

    return Scenario(
        name=str(data.get("name", "scenario")),
        environment=env,
        true_source_cell=(int(cell[0]), int(cell[1])),
        robot_start=(float(start[0]), float(start[1])),
        sensor_params=params,
        feature_kind=est.get("feature", "rank"),
        calibrated=bool(est.get("calibrated", True)),
        max_iterations=int(est.get("max_iterations", 30)),
        sampling_mode=est.get("sampling_mode", "sense_in_motion"),
        seed=int(data.get("seed", 0)),
        obstacle_rects=rects,
        solver=_build_dataclass(SolverParams, _sub(data, "solver"), "solver"),
        features=_build_dataclass(FeatureParams, _sub(data, "features"), "features"),
        noise=noise,
        termination=_build_dataclass(TerminationConfig, _sub(data, "termination"), "termination"),
        planner=_build_dataclass(PlannerConfig, _sub(data, "planner"), "planner"),
    )


def scenario_to_dict(s: Scenario) -> dict:
    env = s.environment
    data = {
        "name": s.name,
        "seed": s.seed,
        "grid": {
            "width_cells": env.width_cells,
            "height_cells": env.height_cells,
            "cell_size": env.cell_size,
            "wind": [float(env.inlet_wind[0]), float(env.inlet_wind[1])],
            "obstacles": [list(r) for r in s.obstacle_rects],
        },
        "source": {"cell": [s.true_source_cell[0], s.true_source_cell[1]]},
        "robot": {"start": [s.robot_start[0], s.robot_start[1]]},
        "sensor": {"overrides": dataclasses.asdict(s.sensor_params)},
        "estimation": {
            "feature": s.feature_kind,
            "calibrated": s.calibrated,
            "max_iterations": s.max_iterations,
            "sampling_mode": s.sampling_mode,
        },
        "solver": dataclasses.asdict(s.solver),
        "features": dataclasses.asdict(s.features),
        "termination": dataclasses.asdict(s.termination),
        "planner": dataclasses.asdict(s.planner),
    }
    if s.noise is not None:
        data["estimation"]["noise"] = dataclasses.asdict(s.noise)
    return data


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario file {path} is not valid YAML: {exc}") from exc
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(s), sort_keys=False))


def scenarios_equal(a: Scenario, b: Scenario) -> bool:
    """Field-for-field equality (Environment compared by content)."""
    ea, eb = a.environment, b.environment
    if ea.fingerprint() != eb.fingerprint() or ea.seed != eb.seed:
        return False
    return scenario_to_dict(a) == scenario_to_dict(b)
