"""Goal selection, grid path planning, and the two sampling modes.

The goal picker clusters posterior mass (weighted k-means over cell
centers) and heads for the cluster with the best mass-per-travel-cost
ratio.  It is a deliberately simple stand-in for information-gain
planning: the estimator comparisons elsewhere in the package hold the
planner fixed across conditions, so only its determinism matters.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .features import Measurement
from .sensor import SensorParams, SensorState, concentration_to_voltage, sample, step_dynamics
from .world import Cell, Environment, ValidationError, cell_center, position_to_cell

SQRT2 = math.sqrt(2.0)


class PlanningError(RuntimeError):
    """Goal unreachable through free space."""


@dataclass(frozen=True)
class PlannerConfig:
    n_clusters: int = 3
    robot_speed: float = 0.27    # m/s
    settle_time: float | None = None  # stop-and-sense dwell; default 3 * tau_res
    kmeans_iters: int = 50

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValidationError("n_clusters must be >= 1")
        if not self.robot_speed > 0:
            raise ValidationError("robot_speed must be > 0")
        if self.settle_time is not None and not self.settle_time > 0:
            raise ValidationError("settle_time must be > 0")


@dataclass(frozen=True)
class Plan:
    goal: tuple[float, float]
    waypoints: tuple[tuple[float, float], ...]
    expected_travel_time: float


# -- goal selection ----------------------------------------------------------

def _weighted_kmeans(points: np.ndarray, weights: np.ndarray, k: int,
                     rng: np.random.Generator, iters: int):
    """Lloyd iterations with weighted centroids; k-means++ style init."""
    n = points.shape[0]
    k = min(k, n)
    # init: first center at the heaviest point, then weighted-distance sampling
    centers = [points[int(np.argmax(weights))]]
    for _ in range(k - 1):
        d2 = np.min([np.sum((points - c) ** 2, axis=1) for c in centers], axis=0)
        score = d2 * weights
        total = score.sum()
        if total <= 0:
            break
        centers.append(points[rng.choice(n, p=score / total)])
    centers = np.array(centers)
    for _ in range(iters):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(centers.shape[0]):
            sel = assign == j
            mass = weights[sel].sum()
            if mass > 0:
                new_centers[j] = (weights[sel][:, None] * points[sel]).sum(axis=0) / mass
        if np.allclose(new_centers, centers):
            centers = new_centers
            break
        centers = new_centers
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    masses = np.array([weights[assign == j].sum() for j in range(centers.shape[0])])
    return centers, masses


def nearest_free_cell(env: Environment, pos, exclude=(), deprioritize=frozenset()):
    """Closest free cell to a world position; ties go to the lowest index.

    Cells in ``exclude`` are never returned; cells in ``deprioritize``
    (e.g. already-visited ones) are returned only if nothing else is left.
    """
    free = env.free_mask()
    rows, cols = np.nonzero(free)
    centers = np.column_stack([(cols + 0.5), (rows + 0.5)]) * env.cell_size
    d = np.linalg.norm(centers - np.asarray(pos, dtype=float), axis=1)
    order = np.lexsort((rows * env.width_cells + cols, d))
    fallback = None
    for i in order:
        cell = (int(cols[i]), int(rows[i]))
        if cell in exclude:
            continue
        if cell in deprioritize:
            if fallback is None:
                fallback = cell
            continue
        return cell
    if fallback is not None:
        return fallback
    raise PlanningError("no free cell available")


def select_goal(posterior, robot_pos, env: Environment, config: PlannerConfig,
                seed: int, visited=frozenset()) -> tuple[float, float]:
    """Next goal position: the best posterior cluster's centroid, snapped to
    a free cell (never the robot's current cell)."""
    robot_cell = position_to_cell(env, robot_pos)
    p = posterior.probability
    rows, cols = np.nonzero(p)
    mass_elsewhere = p.sum() - p[robot_cell[1], robot_cell[0]]
    if rows.size == 0 or mass_elsewhere <= 1e-15:
        cell = nearest_free_cell(env, robot_pos, exclude={robot_cell},
                                 deprioritize=frozenset(visited))
        return cell_center(env, cell)
    points = np.column_stack([(cols + 0.5), (rows + 0.5)]) * env.cell_size
    weights = p[rows, cols]
    rng = np.random.default_rng(seed)
    centers, masses = _weighted_kmeans(points, weights, config.n_clusters, rng,
                                       config.kmeans_iters)
    robot = np.asarray(robot_pos, dtype=float)
    dist = np.linalg.norm(centers - robot, axis=1)
    scores = masses / (1.0 + dist)
    best = centers[int(np.argmax(scores))]
    cell = nearest_free_cell(env, best, exclude={robot_cell})
    return cell_center(env, cell)


# -- path planning -----------------------------------------------------------

def _neighbors(env: Environment, cell: Cell):
    """8-connected free neighbors; diagonal steps may not cut obstacle corners."""
    col, row = cell
    for dc in (-1, 0, 1):
        for dr in (-1, 0, 1):
            if dc == 0 and dr == 0:
                continue
            nxt = (col + dc, row + dr)
            if not env.in_bounds(nxt) or not env.is_free(nxt):
                continue
            if dc != 0 and dr != 0:
                if not (env.is_free((col + dc, row)) and env.is_free((col, row + dr))):
                    continue
            cost = SQRT2 if dc != 0 and dr != 0 else 1.0
            yield nxt, cost


def _octile(a: Cell, b: Cell) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def plan_path(env: Environment, start, goal, config: PlannerConfig = PlannerConfig()) -> Plan:
    """Shortest 8-connected path between the cells containing start and goal.

    A* with the octile heuristic; waypoints are cell centers.  Raises
    PlanningError when the goal is not reachable through free cells.
    """
    start_cell = position_to_cell(env, start)
    goal_cell = position_to_cell(env, goal)
    for name, cell in (("start", start_cell), ("goal", goal_cell)):
        if not env.is_free(cell):
            raise ValidationError(f"{name} cell {cell} is not free")
    if start_cell == goal_cell:
        wp = (cell_center(env, start_cell),)
        return Plan(goal=wp[0], waypoints=wp, expected_travel_time=0.0)

    open_heap = [(0.0, 0, start_cell)]
    g = {start_cell: 0.0}
    came: dict[Cell, Cell] = {}
    closed = set()
    tick = 0
    while open_heap:
        _, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal_cell:
            break
        closed.add(cur)
        for nxt, cost in _neighbors(env, cur):
            cand = g[cur] + cost
            if cand < g.get(nxt, math.inf):
                g[nxt] = cand
                came[nxt] = cur
                tick += 1
                heapq.heappush(open_heap, (cand + _octile(nxt, goal_cell), tick, nxt))
    else:
        raise PlanningError(f"goal cell {goal_cell} unreachable from {start_cell}")

    cells = [goal_cell]
    while cells[-1] != start_cell:
        cells.append(came[cells[-1]])
    cells.reverse()
    waypoints = tuple(cell_center(env, c) for c in cells)
    length = g[goal_cell] * env.cell_size
    return Plan(goal=waypoints[-1], waypoints=waypoints,
                expected_travel_time=length / config.robot_speed)


# -- sampling along a plan ---------------------------------------------------

@dataclass
class SensorDrive:
    """Everything the sampler needs to turn positions into readings."""

    params: SensorParams
    state: SensorState
    concentration_at: Callable[[np.ndarray], float]
    calibrated: bool = True


SENSE_IN_MOTION = "sense_in_motion"
STOP_SENSE_GO = "stop_sense_go"
SAMPLING_MODES = (SENSE_IN_MOTION, STOP_SENSE_GO)


def sample_along(plan: Plan, mode: str, drive: SensorDrive,
                 config: PlannerConfig = PlannerConfig(), iteration: int = 0) -> list[Measurement]:
    """Simulate the robot moving along the plan and collecting readings.

    sense_in_motion: samples at the sensor rate while moving; one
    Measurement per tick at the instantaneous position.  stop_sense_go:
    the sensor still evolves continuously during travel, but the robot
    dwells at every waypoint and records only the settled reading there.
    """
    if mode not in SAMPLING_MODES:
        raise ValidationError(f"unknown sampling mode {mode!r}")
    params = drive.params
    dt = 1.0 / params.sample_rate
    speed = config.robot_speed
    out: list[Measurement] = []
    pos = np.asarray(plan.waypoints[0], dtype=float)

    def read(position: np.ndarray, step: float) -> None:
        c = float(drive.concentration_at(position))
        value = sample(drive.state, params, c, step, calibrated=drive.calibrated)
        out.append(Measurement(position=(float(position[0]), float(position[1])),
                               time=drive.state.time, value=value, iteration=iteration))

    def travel(position: np.ndarray, target: np.ndarray, record: bool) -> np.ndarray:
        remaining = float(np.linalg.norm(target - position))
        while remaining > 1e-12:
            step_len = min(speed * dt, remaining)
            position = position + (target - position) * (step_len / max(remaining, 1e-300))
            remaining -= step_len
            if record:
                read(position, step_len / speed)
            else:
                c = float(drive.concentration_at(position))
                step_dynamics(drive.state, params,
                              concentration_to_voltage(params, c), step_len / speed)
        return position

    if mode == SENSE_IN_MOTION:
        for wp in plan.waypoints[1:]:
            pos = travel(pos, np.asarray(wp, dtype=float), record=True)
        if not out:  # degenerate single-cell plan: sample in place
            read(pos, dt)
        return out

    settle = config.settle_time if config.settle_time is not None else 3.0 * params.tau_res
    for i, wp in enumerate(plan.waypoints):
        if i > 0:
            pos = travel(pos, np.asarray(wp, dtype=float), record=False)
        target = concentration_to_voltage(params, float(drive.concentration_at(pos)))
        elapsed = 0.0
        while elapsed + dt < settle:
            step_dynamics(drive.state, params, target, dt)
            elapsed += dt
        read(pos, settle - elapsed)
    return out
