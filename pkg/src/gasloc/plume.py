"""Steady-state gas dispersion surrogate.

For a hypothesized source cell, solves the steady 2D advection-diffusion
equation with a constant unit source, uniform wind, a small linear decay
(which bounds the steady state on an open domain), zero-flux boundaries at
obstacles and side walls, and advective outflow through downwind domain
boundaries.  Finite volumes with upwind advection and central diffusion,
iterated with red-black successive over-relaxation.

The estimation loop queries a field for every candidate cell at every
iteration, so solved fields are memoized in memory and optionally on disk.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .world import Cell, Environment, ValidationError

CACHE_FORMAT_VERSION = 1

# neighbor offsets as (dcol, drow) with the face's outward unit normal
_FACES = (
    ((1, 0), (1.0, 0.0)),    # east
    ((-1, 0), (-1.0, 0.0)),  # west
    ((0, 1), (0.0, 1.0)),    # north
    ((0, -1), (0.0, -1.0)),  # south
)


class SolverError(RuntimeError):
    """The iterative solve failed to reach the requested residual."""


@dataclass(frozen=True)
class SolverParams:
    diffusion: float = 0.05       # m^2/s
    decay: float = 0.01           # 1/s, bounds the steady state
    source_strength: float = 1.0  # relative units
    tolerance: float = 1e-6       # relative residual
    max_sweeps: int = 50_000
    omega: float = 1.8            # SOR relaxation factor

    def __post_init__(self):
        if not self.diffusion > 0:
            raise ValidationError("diffusion must be > 0")
        if self.decay < 0:
            raise ValidationError("decay must be >= 0")
        if not self.source_strength > 0:
            raise ValidationError("source_strength must be > 0")
        if not 0 < self.omega < 2:
            raise ValidationError("omega must lie in (0, 2)")

    def fingerprint_fields(self) -> list[str]:
        return [float(self.diffusion).hex(), float(self.decay).hex(),
                float(self.source_strength).hex(), float(self.tolerance).hex(),
                str(self.max_sweeps), float(self.omega).hex()]


@dataclass(frozen=True)
class PlumeField:
    """Steady concentration per cell for one source hypothesis.

    ``concentration`` is zero on obstacle cells (the value is undefined
    there, zero by convention).
    """

    source_cell: Cell
    concentration: np.ndarray  # (height_cells, width_cells)
    solver_residual: float
    sweeps: int = 0


def _shift(arr: np.ndarray, dcol: int, drow: int) -> np.ndarray:
    """Neighbor values at (col+dcol, row+drow); zero outside the grid."""
    out = np.zeros_like(arr)
    h, w = arr.shape
    rs = slice(max(drow, 0), h + min(drow, 0))
    rd = slice(max(-drow, 0), h + min(-drow, 0))
    cs = slice(max(dcol, 0), w + min(dcol, 0))
    cd = slice(max(-dcol, 0), w + min(-dcol, 0))
    out[rd, cd] = arr[rs, cs]
    return out


def _assemble(env: Environment, params: SolverParams):
    """Finite-volume coefficients: neighbor weights per face and the diagonal."""
    h = env.cell_size
    d_coef = params.diffusion / h**2
    free = env.free_mask()
    ux, uy = float(env.inlet_wind[0]), float(env.inlet_wind[1])
    diag = np.where(free, params.decay, 1.0)
    neighbor = []
    for (dcol, drow), (nx, ny) in _FACES:
        u_n = ux * nx + uy * ny  # wind through the face, along outward normal
        inb = np.zeros(env.shape, dtype=bool)
        hgt, wid = env.shape
        inb[max(-drow, 0):hgt - max(drow, 0), max(-dcol, 0):wid - max(dcol, 0)] = True
        nfree = _shift(free.astype(float), dcol, drow).astype(bool) & inb
        a = np.where(free & nfree, d_coef + max(-u_n, 0.0) / h, 0.0)
        diag += np.where(free & nfree, d_coef + max(u_n, 0.0) / h, 0.0)
        # outflow through the domain boundary: advect out at the upwind value
        diag += np.where(free & ~inb, max(u_n, 0.0) / h, 0.0)
        neighbor.append(((dcol, drow), a))
    return diag, neighbor


def _iterate(env: Environment, source_cell: Cell, params: SolverParams,
             max_sweeps: int, tolerance: float | None = None):
    """Red-black SOR sweeps; returns (concentration, relative residual, sweeps).

    Stops early once the residual falls below ``tolerance`` (if given);
    otherwise runs exactly ``max_sweeps`` sweeps.
    """
    h = env.cell_size
    free = env.free_mask()
    diag, neighbor = _assemble(env, params)
    b = np.zeros(env.shape)
    col, row = source_cell
    b[row, col] = params.source_strength / h**2
    b_norm = float(np.linalg.norm(b))

    c = np.zeros(env.shape)
    rows, cols = np.indices(env.shape)
    colors = [((rows + cols) % 2 == p) & free for p in (0, 1)]
    omega = params.omega

    def neighbor_sum(x):
        s = np.zeros_like(x)
        for (dcol, drow), a in neighbor:
            s += a * _shift(x, dcol, drow)
        return s

    residual = np.inf
    sweeps = 0
    check_every = 20
    while sweeps < max_sweeps:
        for mask in colors:
            s = neighbor_sum(c)
            c[mask] = (1.0 - omega) * c[mask] + omega * (s[mask] + b[mask]) / diag[mask]
        sweeps += 1
        if sweeps % check_every == 0 or sweeps == max_sweeps:
            r = b + neighbor_sum(c) - diag * c
            residual = float(np.linalg.norm(r[free]) / b_norm)
            if tolerance is not None and residual < tolerance:
                break
    return c, residual, sweeps


def solve_plume(env: Environment, source_cell: Cell, params: SolverParams = SolverParams()) -> PlumeField:
    """Steady plume field for a unit source at ``source_cell``.

    Raises SolverError if the relative residual does not fall below
    ``params.tolerance`` within ``params.max_sweeps`` sweeps.
    """
    if not env.is_free(source_cell):
        raise ValidationError(f"source cell {source_cell} is not a free cell")
    c, residual, sweeps = _iterate(env, source_cell, params,
                                   params.max_sweeps, params.tolerance)
    if residual >= params.tolerance:
        raise SolverError(
            f"plume solve for source {source_cell} stopped at residual "
            f"{residual:.3e} after {sweeps} sweeps (tolerance {params.tolerance:.1e})"
        )
    # SOR overshoot can leave tiny negatives; the steady solution is >= 0
    np.maximum(c, 0.0, out=c)
    c[~env.free_mask()] = 0.0
    c.setflags(write=False)
    return PlumeField(source_cell=tuple(source_cell), concentration=c,
                      solver_residual=residual, sweeps=sweeps)


# -- sampling the field ------------------------------------------------------

def _bilinear_weights(env: Environment, positions):
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    xmax, ymax = env.extent
    if np.any(pos[:, 0] < 0) or np.any(pos[:, 0] >= xmax) or \
       np.any(pos[:, 1] < 0) or np.any(pos[:, 1] >= ymax):
        raise ValidationError("position outside the domain")
    gx = pos[:, 0] / env.cell_size - 0.5
    gy = pos[:, 1] / env.cell_size - 0.5
    c0 = np.clip(np.floor(gx).astype(int), 0, max(env.width_cells - 2, 0))
    r0 = np.clip(np.floor(gy).astype(int), 0, max(env.height_cells - 2, 0))
    c1 = np.minimum(c0 + 1, env.width_cells - 1)
    r1 = np.minimum(r0 + 1, env.height_cells - 1)
    tx = np.clip(gx - c0, 0.0, 1.0)
    ty = np.clip(gy - r0, 0.0, 1.0)
    occupied = env.obstacle_mask[
        np.clip(np.floor(pos[:, 1] / env.cell_size).astype(int), 0, env.height_cells - 1),
        np.clip(np.floor(pos[:, 0] / env.cell_size).astype(int), 0, env.width_cells - 1),
    ]
    return (r0, c0, r1, c1, tx, ty, occupied)


def estimate_at(field: PlumeField, env: Environment, positions) -> np.ndarray:
    """Bilinear interpolation of the field at world positions.

    Returns zero wherever the position's cell is an obstacle.
    """
    r0, c0, r1, c1, tx, ty, occ = _bilinear_weights(env, positions)
    f = field.concentration
    v = ((1 - ty) * ((1 - tx) * f[r0, c0] + tx * f[r0, c1])
         + ty * ((1 - tx) * f[r1, c0] + tx * f[r1, c1]))
    v[occ] = 0.0
    return v


def estimate_many(fields: np.ndarray, env: Environment, positions) -> np.ndarray:
    """Interpolate a stack of fields (N, H, W) at P positions -> (N, P)."""
    r0, c0, r1, c1, tx, ty, occ = _bilinear_weights(env, positions)
    v = ((1 - ty) * ((1 - tx) * fields[:, r0, c0] + tx * fields[:, r0, c1])
         + ty * ((1 - tx) * fields[:, r1, c0] + tx * fields[:, r1, c1]))
    v[:, occ] = 0.0
    return v


# -- caching -----------------------------------------------------------------

def cache_key(env: Environment, params: SolverParams) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(env.fingerprint().encode())
    h.update(("|".join(params.fingerprint_fields()) + f"|v{CACHE_FORMAT_VERSION}").encode())
    return h.hexdigest()[:16]


class PlumeCache:
    """Memoized plume solves for one environment, optionally disk-backed.

    A cache hit returns a field bit-identical to a fresh solve: disk
    entries store the solved array verbatim (.npz round-trips exactly).
    Directory layout: ``<dir>/<key>/meta.json`` plus one
    ``cell_<flat>.npz`` per solved source cell.  A format or parameter
    mismatch in meta.json invalidates the directory.
    """

    def __init__(self, env: Environment, params: SolverParams = SolverParams(),
                 directory: str | os.PathLike | None = None):
        self.env = env
        self.params = params
        self.key = cache_key(env, params)
        self._memory: dict[int, PlumeField] = {}
        self._lock = threading.Lock()
        self.directory = None
        if directory is None:
            directory = os.environ.get("GASLOC_CACHE_DIR") or None
        if directory is not None:
            self.directory = Path(directory) / self.key
            self.directory.mkdir(parents=True, exist_ok=True)
            meta_path = self.directory / "meta.json"
            meta = {"format_version": CACHE_FORMAT_VERSION, "key": self.key}
            if meta_path.exists():
                try:
                    ok = json.loads(meta_path.read_text()) == meta
                except (OSError, json.JSONDecodeError):
                    ok = False
                if not ok:
                    for f in self.directory.glob("cell_*.npz"):
                        f.unlink()
                    meta_path.write_text(json.dumps(meta))
            else:
                meta_path.write_text(json.dumps(meta))

    def _disk_path(self, flat: int) -> Path:
        return self.directory / f"cell_{flat:06d}.npz"

    def field(self, source_cell: Cell) -> PlumeField:
        flat = self.env.flat_index(source_cell)
        with self._lock:
            if flat in self._memory:
                return self._memory[flat]
        fld = None
        if self.directory is not None:
            path = self._disk_path(flat)
            if path.exists():
                with np.load(path) as data:
                    conc = data["concentration"]
                    conc.setflags(write=False)
                    fld = PlumeField(source_cell=tuple(source_cell), concentration=conc,
                                     solver_residual=float(data["residual"]),
                                     sweeps=int(data["sweeps"]))
        if fld is None:
            fld = solve_plume(self.env, source_cell, self.params)
            if self.directory is not None:
                path = self._disk_path(flat)
                tmp = path.with_suffix(".tmp.npz")
                np.savez(tmp, concentration=fld.concentration,
                         residual=fld.solver_residual, sweeps=fld.sweeps)
                os.replace(tmp, path)
        with self._lock:
            self._memory[flat] = fld
        return fld

    def fields_tensor(self, cells) -> np.ndarray:
        """Stack of fields for the given source cells, shape (N, H, W)."""
        out = np.empty((len(cells),) + self.env.shape)
        for i, cell in enumerate(cells):
            out[i] = self.field(cell).concentration
        return out

    def prewarm(self, cells) -> None:
        for cell in cells:
            self.field(cell)
