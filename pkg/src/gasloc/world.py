"""Discretized 2D environment: grid geometry, obstacles, and wind inlet.

Conventions used throughout the package:

* A cell index is a ``(col, row)`` pair of ints; the flat index is
  ``row * width_cells + col`` (row-major).
* World coordinates are meters with the origin at the lower-left corner
  of the grid, x along columns and y along rows.
* Grid-shaped arrays have shape ``(height_cells, width_cells)`` and are
  indexed ``[row, col]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

Cell = tuple[int, int]


class ValidationError(ValueError):
    """A configuration value violates an invariant; message names the field."""


@dataclass(frozen=True, eq=False)
class Environment:
    """Rectangular grid world with an obstacle mask and a uniform inlet wind.

    Immutable after construction; safe to share across worker processes.
    """

    width_cells: int
    height_cells: int
    cell_size: float
    obstacle_mask: np.ndarray  # bool, shape (height_cells, width_cells)
    inlet_wind: np.ndarray = field(default_factory=lambda: np.zeros(2))
    seed: int = 0

    def __post_init__(self):
        if self.width_cells <= 0 or self.height_cells <= 0:
            raise ValidationError("width_cells/height_cells must be positive")
        if not self.cell_size > 0:
            raise ValidationError("cell_size must be > 0")
        mask = np.asarray(self.obstacle_mask, dtype=bool)
        if mask.shape != (self.height_cells, self.width_cells):
            raise ValidationError(
                f"obstacle_mask shape {mask.shape} != "
                f"(height_cells, width_cells) = ({self.height_cells}, {self.width_cells})"
            )
        if mask.all():
            raise ValidationError("obstacle_mask leaves no free cell")
        wind = np.asarray(self.inlet_wind, dtype=float).reshape(2)
        if not np.all(np.isfinite(wind)):
            raise ValidationError("inlet_wind must be finite")
        if int(self.seed) < 0:
            raise ValidationError("seed must be non-negative")
        mask = mask.copy()
        mask.setflags(write=False)
        wind = wind.copy()
        wind.setflags(write=False)
        object.__setattr__(self, "obstacle_mask", mask)
        object.__setattr__(self, "inlet_wind", wind)
        object.__setattr__(self, "seed", int(self.seed))

    # -- geometry -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_cells, self.width_cells)

    @property
    def extent(self) -> tuple[float, float]:
        """Domain size (x_max, y_max) in meters."""
        return (self.width_cells * self.cell_size, self.height_cells * self.cell_size)

    @property
    def n_cells(self) -> int:
        return self.width_cells * self.height_cells

    def free_mask(self) -> np.ndarray:
        return ~self.obstacle_mask

    def interior_mask(self) -> np.ndarray:
        """Free cells excluding the outermost boundary ring.

        This is the candidate-source support: the prior is zero on
        obstacles and on the boundary ring.
        """
        interior = np.zeros(self.shape, dtype=bool)
        if self.height_cells > 2 and self.width_cells > 2:
            interior[1:-1, 1:-1] = True
        else:
            interior[:] = True
        return interior & self.free_mask()

    def in_bounds(self, cell: Cell) -> bool:
        col, row = cell
        return 0 <= col < self.width_cells and 0 <= row < self.height_cells

    def is_free(self, cell: Cell) -> bool:
        col, row = cell
        return self.in_bounds(cell) and not self.obstacle_mask[row, col]

    def flat_index(self, cell: Cell) -> int:
        if not self.in_bounds(cell):
            raise IndexError(f"cell {cell} outside {self.width_cells}x{self.height_cells} grid")
        col, row = cell
        return row * self.width_cells + col

    def cell_from_flat(self, flat: int) -> Cell:
        if not 0 <= flat < self.n_cells:
            raise IndexError(f"flat index {flat} outside grid")
        return (flat % self.width_cells, flat // self.width_cells)

    def fingerprint(self) -> str:
        """Stable hash of the geometry; used to key plume caches."""
        h = hashlib.sha256()
        h.update(np.int64([self.width_cells, self.height_cells]).tobytes())
        h.update(np.float64(self.cell_size).tobytes())
        h.update(np.asarray(self.inlet_wind, dtype=np.float64).tobytes())
        h.update(np.packbits(self.obstacle_mask).tobytes())
        return h.hexdigest()[:16]


def cell_center(env: Environment, cell: Cell) -> np.ndarray:
    """World coordinates of the center of ``cell`` = ((col+0.5)h, (row+0.5)h)."""
    if not env.in_bounds(cell):
        raise IndexError(f"cell {cell} outside {env.width_cells}x{env.height_cells} grid")
    col, row = cell
    return np.array([(col + 0.5) * env.cell_size, (row + 0.5) * env.cell_size])


def position_to_cell(env: Environment, pos) -> Cell:
    """Cell containing ``pos``; cells are half-open [low, high) on both axes.

    A point exactly on a shared boundary belongs to the higher-index cell.
    """
    x, y = float(pos[0]), float(pos[1])
    xmax, ymax = env.extent
    if not (0.0 <= x < xmax and 0.0 <= y < ymax):
        raise ValidationError(f"position ({x}, {y}) outside domain [0, {xmax}) x [0, {ymax})")
    col = int(np.floor(x / env.cell_size))
    row = int(np.floor(y / env.cell_size))
    # guard against floating-point edge at the very top boundary
    col = min(col, env.width_cells - 1)
    row = min(row, env.height_cells - 1)
    return (col, row)


def rasterize_rectangles(width_cells: int, height_cells: int, cell_size: float,
                         rectangles) -> np.ndarray:
    """Obstacle mask from axis-aligned rectangles in meters.

    A cell is occupied iff its center lies inside some rectangle
    [xmin, xmax) x [ymin, ymax).
    """
    mask = np.zeros((height_cells, width_cells), dtype=bool)
    cols = (np.arange(width_cells) + 0.5) * cell_size
    rows = (np.arange(height_cells) + 0.5) * cell_size
    for rect in rectangles:
        xmin, ymin, xmax, ymax = (float(v) for v in rect)
        if xmax < xmin or ymax < ymin:
            raise ValidationError(f"obstacle rectangle {rect!r} has negative extent")
        inside_x = (cols >= xmin) & (cols < xmax)
        inside_y = (rows >= ymin) & (rows < ymax)
        mask |= inside_y[:, None] & inside_x[None, :]
    return mask
