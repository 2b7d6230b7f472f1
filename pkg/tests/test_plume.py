"""Steady-state dispersion solver: physics properties, closed-form
comparison, interpolation, and caching."""

import numpy as np
import pytest

from gasloc.plume import (
    PlumeCache,
    SolverError,
    SolverParams,
    _iterate,
    cache_key,
    estimate_at,
    estimate_many,
    solve_plume,
)
from gasloc.world import Environment, ValidationError, cell_center, rasterize_rectangles

from _analytic import cell_mean_field


def make_env(width=31, height=31, cell_size=0.2, rects=(), wind=(0.0, 0.0)):
    mask = rasterize_rectangles(width, height, cell_size, rects)
    return Environment(width_cells=width, height_cells=height, cell_size=cell_size,
                       obstacle_mask=mask, inlet_wind=np.asarray(wind, dtype=float))


QUICK = SolverParams(decay=0.05, tolerance=1e-8)


def test_no_wind_field_has_full_square_symmetry():
    env = make_env()
    c = solve_plume(env, (15, 15), QUICK).concentration
    np.testing.assert_allclose(c, c[::-1, :], rtol=1e-6)
    np.testing.assert_allclose(c, c[:, ::-1], rtol=1e-6)
    np.testing.assert_allclose(c, c.T, rtol=1e-6)


def test_wind_skews_field_downwind():
    env = make_env(wind=(0.05, 0.0))
    c = solve_plume(env, (15, 15), QUICK).concentration
    assert c[15, 23] > 2.0 * c[15, 7]       # downwind beats upwind at equal distance
    np.testing.assert_allclose(c, c[::-1, :], rtol=1e-6)  # still mirror-symmetric in y


def test_field_is_linear_in_source_strength():
    env = make_env()
    c1 = solve_plume(env, (10, 12), QUICK).concentration
    c2 = solve_plume(env, (10, 12),
                     SolverParams(decay=0.05, tolerance=1e-8, source_strength=2.0)).concentration
    np.testing.assert_allclose(c2, 2.0 * c1, rtol=1e-5)


def test_decay_shrinks_the_far_field():
    env = make_env()
    slow = solve_plume(env, (15, 15), SolverParams(decay=0.01, tolerance=1e-8)).concentration
    fast = solve_plume(env, (15, 15), SolverParams(decay=0.2, tolerance=1e-8)).concentration
    assert fast[15, 27] < slow[15, 27]
    # decay removes mass everywhere, more so far from the source
    assert fast[15, 27] / slow[15, 27] < fast[15, 17] / slow[15, 17]


def test_obstacle_blocks_transport():
    # wall with a gap vs no wall: concentration behind the wall drops
    wall = [(2.8, 0.0, 3.0, 5.4)]
    env_open = make_env()
    env_wall = make_env(rects=wall)
    c_open = solve_plume(env_open, (5, 15), QUICK).concentration
    c_wall = solve_plume(env_wall, (5, 15), QUICK).concentration
    behind = (slice(13, 18), slice(20, 26))
    assert c_wall[behind].max() < 0.5 * c_open[behind].max()
    assert (c_wall[~env_wall.free_mask()] == 0.0).all()


def test_matches_closed_form_solution():
    # Pure diffusion-decay on a fine grid; boundary margin excluded, the
    # singular source cell compared separately (cell means of a log
    # singularity converge slowly there).
    env = make_env(width=49, height=49, cell_size=0.15)
    src = (24, 24)
    num = solve_plume(env, src, SolverParams(decay=0.05, tolerance=1e-8)).concentration
    ana = cell_mean_field(49, 49, 0.15, src, (0.0, 0.0), 0.05, 0.05,
                          subgrid=6, crosswind_reflections=1)
    m = 3
    diff = (num - ana)[m:-m, m:-m]
    rel_l2 = np.linalg.norm(diff) / np.linalg.norm(ana[m:-m, m:-m])
    assert rel_l2 < 0.10
    # pointwise near the source, where boundary effects are negligible
    rel = np.abs(num - ana) / ana
    near = rel[22:27, 22:27].copy()
    near[2, 2] = 0.0  # the singular source cell is checked in the acceptance suite
    assert near.max() < 0.10


def test_solver_reports_converged_residual():
    env = make_env()
    field = solve_plume(env, (15, 15), QUICK)
    assert field.solver_residual < QUICK.tolerance
    assert field.sweeps > 0
    assert (field.concentration >= 0.0).all()
    with pytest.raises(ValueError):
        field.concentration[0, 0] = 1.0  # read-only


def test_residual_decreases_with_more_sweeps():
    env = make_env()
    _, r_short, _ = _iterate(env, (15, 15), QUICK, max_sweeps=40)
    _, r_long, _ = _iterate(env, (15, 15), QUICK, max_sweeps=400)
    assert r_long < r_short


def test_non_convergence_raises():
    env = make_env()
    with pytest.raises(SolverError):
        solve_plume(env, (15, 15), SolverParams(tolerance=1e-12, max_sweeps=40))


def test_source_must_be_free():
    env = make_env(rects=[(1.0, 1.0, 1.2, 1.2)])
    blocked = (5, 5)
    assert not env.is_free(blocked)
    with pytest.raises(ValidationError):
        solve_plume(env, blocked, QUICK)


def test_estimate_at_reproduces_cell_centers():
    env = make_env()
    field = solve_plume(env, (15, 15), QUICK)
    cells = [(0, 0), (15, 15), (30, 30), (7, 22)]
    centers = np.array([cell_center(env, c) for c in cells])
    got = estimate_at(field, env, centers)
    expected = [field.concentration[r, c] for c, r in cells]
    np.testing.assert_allclose(got, expected)


def test_estimate_at_interpolates_between_centers():
    env = make_env()
    field = solve_plume(env, (15, 15), QUICK)
    a = cell_center(env, (10, 10))
    b = cell_center(env, (11, 10))
    mid = (a + b) / 2.0
    got = estimate_at(field, env, [mid])[0]
    expected = (field.concentration[10, 10] + field.concentration[10, 11]) / 2.0
    assert got == pytest.approx(expected)


def test_estimate_at_zero_inside_obstacles_and_rejects_outside():
    env = make_env(rects=[(1.0, 1.0, 1.4, 1.4)])
    field = solve_plume(env, (15, 15), QUICK)
    inside = np.array([[1.1, 1.1]])
    assert estimate_at(field, env, inside)[0] == 0.0
    with pytest.raises(ValidationError):
        estimate_at(field, env, [[-0.1, 1.0]])
    with pytest.raises(ValidationError):
        estimate_at(field, env, [[env.extent[0], 1.0]])


def test_estimate_many_matches_single_field_loop():
    env = make_env()
    fields = np.stack([solve_plume(env, cell, QUICK).concentration
                       for cell in [(10, 10), (20, 20)]])
    rng = np.random.default_rng(0)
    pos = rng.uniform(0.1, 6.0, size=(9, 2))
    got = estimate_many(fields, env, pos)
    assert got.shape == (2, 9)
    for i, cell in enumerate([(10, 10), (20, 20)]):
        single = estimate_at(solve_plume(env, cell, QUICK), env, pos)
        np.testing.assert_allclose(got[i], single)


def test_cache_key_tracks_environment_and_params():
    env = make_env()
    k = cache_key(env, QUICK)
    assert k == cache_key(make_env(), QUICK)
    assert k != cache_key(make_env(wind=(0.01, 0.0)), QUICK)
    assert k != cache_key(env, SolverParams(decay=0.06, tolerance=1e-8))


def test_memory_cache_returns_identical_field(tmp_path):
    env = make_env()
    cache = PlumeCache(env, QUICK)
    f1 = cache.field((12, 9))
    f2 = cache.field((12, 9))
    assert f1 is f2


def test_disk_cache_round_trip_is_bit_identical(tmp_path):
    env = make_env()
    first = PlumeCache(env, QUICK, directory=tmp_path)
    solved = first.field((12, 9))
    reloaded = PlumeCache(env, QUICK, directory=tmp_path).field((12, 9))
    assert (reloaded.concentration == solved.concentration).all()
    assert reloaded.solver_residual == solved.solver_residual
    assert reloaded.sweeps == solved.sweeps


def test_stale_disk_cache_is_invalidated(tmp_path):
    env = make_env()
    cache = PlumeCache(env, QUICK, directory=tmp_path)
    cache.field((12, 9))
    marker = cache.directory / "meta.json"
    marker.write_text('{"format_version": -1}')
    fresh = PlumeCache(env, QUICK, directory=tmp_path)
    assert not list(fresh.directory.glob("cell_*.npz"))
    assert (fresh.field((12, 9)).concentration == cache.field((12, 9)).concentration).all()


def test_fields_tensor_stacks_in_order(tmp_path):
    env = make_env()
    cache = PlumeCache(env, QUICK)
    cells = [(10, 10), (20, 20), (15, 15)]
    tensor = cache.fields_tensor(cells)
    assert tensor.shape == (3,) + env.shape
    for i, cell in enumerate(cells):
        np.testing.assert_array_equal(tensor[i], cache.field(cell).concentration)
