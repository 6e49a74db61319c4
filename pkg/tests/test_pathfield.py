import math

import numpy as np
import pytest

from oracles import dense_laplace_solve
from planarwbc.pathfield import (
    FREE,
    GOAL,
    OBSTACLE,
    FieldError,
    GridField,
    PathMetricsState,
    PathPolyline,
    cells_connected,
    extract_path,
    field_to_pgm,
    init_path_metrics,
    path_metrics,
    project_on_path,
    rasterize_world,
    solve_harmonic,
)
from planarwbc.world import WorldGeometry


def empty_world(w=4.0, h=3.0):
    return WorldGeometry(
        segments=np.array([[0, 0, w, 0], [w, 0, w, h], [w, h, 0, h], [0, h, 0, 0]],
                          dtype=float),
        bounds=(0.0, 0.0, w, h),
    )


def random_grid_field(rng, n=20, p_obstacle=0.25):
    # Random interior obstacles with an enclosing ring, goal in a free cell.
    kind = np.full((n, n), FREE, dtype=np.uint8)
    kind[0, :] = kind[-1, :] = OBSTACLE
    kind[:, 0] = kind[:, -1] = OBSTACLE
    interior = rng.random((n - 2, n - 2)) < p_obstacle
    kind[1:-1, 1:-1] = np.where(interior, OBSTACLE, FREE)
    free_cells = np.argwhere(kind == FREE)
    if free_cells.size == 0:
        return None
    gr, gc = free_cells[rng.integers(len(free_cells))]
    # The solver needs a free neighbor next to the goal.
    has_free_nb = any(
        0 <= gr + dr < n and 0 <= gc + dc < n and kind[gr + dr, gc + dc] == FREE
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1))
    )
    if not has_free_nb:
        return None
    kind[gr, gc] = GOAL
    field = GridField(origin=(0.0, 0.0), cell_size=0.1, kind=kind,
                      values=np.zeros((n, n)), goal_cell=(int(gr), int(gc)))
    return field


def test_rasterize_empty_world_ring():
    world = WorldGeometry(bounds=(0.0, 0.0, 1.0, 1.0))
    field = rasterize_world(world, 0.5, inflate=0.0, goal=(0.75, 0.75))
    assert field.shape == (2, 2) or field.shape == (3, 3)
    # With a 1x1 m world at h=0.5 the grid is 2x2... the ring rule then
    # leaves no free cell, so use a finer grid for the structural check.
    field = rasterize_world(world, 0.25, inflate=0.0, goal=(0.6, 0.6))
    h, w = field.shape
    assert np.all(field.kind[0, :] == OBSTACLE)
    assert np.all(field.kind[-1, :] == OBSTACLE)
    assert np.all(field.kind[:, 0] == OBSTACLE)
    assert np.all(field.kind[:, -1] == OBSTACLE)
    inner = field.kind[1:-1, 1:-1]
    assert np.all((inner == FREE) | (inner == GOAL))


def test_rasterize_agrees_with_center_tests():
    rng = np.random.default_rng(0)
    world = WorldGeometry(
        segments=np.array([[0.5, 0.5, 3.5, 2.5]]),
        boxes=np.array([[1.0, 0.2, 1.6, 1.4], [2.5, 1.5, 3.2, 2.8]]),
        bounds=(0.0, 0.0, 4.0, 3.0),
    )
    inflate = 0.15
    field = rasterize_world(world, 0.1, inflate=inflate, goal=(0.35, 2.63))
    from planarwbc.geometry import point_box_distance, point_segment_distance

    h, w = field.shape
    for _ in range(500):
        r = rng.integers(1, h - 1)
        c = rng.integers(1, w - 1)
        center = field.cell_center(r, c)
        d = min(
            min(point_segment_distance(center, s) for s in world.segments),
            min(point_box_distance(center, b) for b in world.boxes),
        )
        expect = OBSTACLE if d <= inflate else FREE
        got = field.kind[r, c]
        if got == GOAL:
            continue
        assert got == expect, (r, c, d)


def test_rasterize_goal_in_obstacle_raises():
    world = WorldGeometry(boxes=np.array([[1.0, 1.0, 2.0, 2.0]]), bounds=(0, 0, 3, 3))
    with pytest.raises(FieldError):
        rasterize_world(world, 0.1, inflate=0.05, goal=(1.5, 1.5))


def test_solve_strip_monotone():
    # 1xN free strip: values decrease strictly toward the goal at the end.
    n = 12
    kind = np.full((3, n), OBSTACLE, dtype=np.uint8)
    kind[1, 1:-1] = FREE
    kind[1, 1] = GOAL
    field = GridField(origin=(0, 0), cell_size=0.1, kind=kind,
                      values=np.zeros((3, n)), goal_cell=(1, 1))
    solve_harmonic(field)
    row = field.values[1, 1:-1]
    assert np.all(np.diff(row) > 0.0)
    assert row[0] == 0.0


def test_solve_matches_dense_oracle():
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 8:
        field = random_grid_field(rng)
        if field is None:
            continue
        try:
            solve_harmonic(field)
        except FieldError:
            continue  # disconnected free regions cannot converge to the stencil everywhere
        dense = dense_laplace_solve(field)
        free = field.kind == FREE
        start = np.argwhere(free)
        # Compare only cells connected to the goal; isolated pockets have no
        # boundary data path and the dense system still pins them via walls.
        err = np.max(np.abs(field.values[free] - dense[free]))
        assert err < 1e-6
        checked += 1


def test_converged_stencil_fixed_point():
    rng = np.random.default_rng(2)
    field = None
    while field is None:
        field = random_grid_field(rng, n=16, p_obstacle=0.2)
    solve_harmonic(field)
    v = field.values
    free = field.kind == FREE
    nb = 0.25 * (v[:-2, 1:-1] + v[2:, 1:-1] + v[1:-1, :-2] + v[1:-1, 2:])
    resid = np.abs(nb - v[1:-1, 1:-1])[free[1:-1, 1:-1]]
    assert np.max(resid) < 1e-9


def test_maximum_principle():
    rng = np.random.default_rng(3)
    field = None
    while field is None:
        field = random_grid_field(rng, n=18, p_obstacle=0.15)
    solve_harmonic(field)
    free = field.kind == FREE
    connected = np.array([
        cells_connected(field, tuple(cell)) for cell in np.argwhere(free)
    ])
    vals = field.values[free][connected]
    assert np.all(vals > 0.0)
    assert np.all(vals < 1.0)


def test_extract_path_straight_corridor():
    world = empty_world(4.0, 1.0)
    goal = (3.5, 0.5)
    field = rasterize_world(world, 0.05, inflate=0.05, goal=goal)
    solve_harmonic(field)
    path = extract_path(field, (0.5, 0.5), goal=goal)
    assert np.allclose(path.points[0], [0.5, 0.5])
    assert np.allclose(path.points[-1], goal)
    # Start and goal sit on the centerline; the streamline stays within 2h.
    assert np.max(np.abs(path.points[:, 1] - 0.5)) < 2 * 0.05
    # Potential decreases along the streamline.
    from planarwbc.pathfield import _bilinear_with_gradient

    vals = [_bilinear_with_gradient(field, p)[0] for p in path.points[:-1]]
    assert np.all(np.diff(vals) <= 1e-12)


def test_extract_from_every_free_cell():
    rng = np.random.default_rng(4)
    world = WorldGeometry(
        segments=np.array([[0, 0, 4, 0], [4, 0, 4, 3], [4, 3, 0, 3], [0, 3, 0, 0]],
                          dtype=float),
        boxes=np.array([[1.2, 0.0, 1.5, 2.0], [2.5, 1.0, 2.8, 3.0]]),
        bounds=(0, 0, 4, 3),
    )
    goal = (3.6, 2.6)
    field = rasterize_world(world, 0.1, inflate=0.08, goal=goal)
    solve_harmonic(field)
    free_cells = np.argwhere(field.kind == FREE)
    for r, c in free_cells:
        if not cells_connected(field, (int(r), int(c))):
            continue
        path = extract_path(field, field.cell_center(r, c), goal=goal)
        assert np.allclose(path.points[-1], goal)


def test_extract_start_adjacent_to_goal():
    world = empty_world(2.0, 2.0)
    goal = (1.0, 1.0)
    field = rasterize_world(world, 0.1, inflate=0.05, goal=goal)
    solve_harmonic(field)
    gr, gc = field.goal_cell
    start = field.cell_center(gr, gc + 1)
    path = extract_path(field, start, goal=goal)
    assert path.total_length <= 2 * 0.1 * math.sqrt(2.0) + 1e-9


def test_extract_rejects_obstacle_start():
    world = empty_world()
    field = rasterize_world(world, 0.1, inflate=0.05, goal=(2.0, 1.5))
    solve_harmonic(field)
    with pytest.raises(FieldError):
        extract_path(field, (0.0, 0.0))  # inside the boundary ring


def test_polyline_dedupes_and_cumlen():
    path = PathPolyline.from_points([[0, 0], [0, 0], [1, 0], [1, 1]])
    assert len(path.points) == 3
    assert np.allclose(path.cumlen, [0.0, 1.0, 2.0])
    assert path.total_length == pytest.approx(2.0)
    with pytest.raises(ValueError):
        PathPolyline.from_points([[0.5, 0.5], [0.5, 0.5]])


def test_projection_and_tie_break():
    path = PathPolyline.from_points([[0, 0], [2, 0], [2, 2]])
    dev, arc = project_on_path(path, (1.0, 0.5))
    assert dev == pytest.approx(0.5)
    assert arc == pytest.approx(1.0)
    # Equidistant from both legs: tie broken toward the larger arc length.
    dev, arc = project_on_path(path, (1.5, 0.5))
    assert dev == pytest.approx(0.5)
    assert arc == pytest.approx(2.5)


def test_path_metrics_stationary_and_pure_progress():
    path = PathPolyline.from_points([[0, 0], [4, 0]])
    state = init_path_metrics(path, (1.0, 0.0))
    d_dev, d_prog, state = path_metrics(path, state, (1.0, 0.0))
    assert d_dev == 0.0 and d_prog == 0.0
    d_dev, d_prog, state = path_metrics(path, state, (1.02, 0.0))
    assert d_dev == pytest.approx(0.0, abs=1e-15)
    assert d_prog == pytest.approx(0.02)


def test_path_metrics_telescoping_and_lipschitz():
    rng = np.random.default_rng(5)
    path = PathPolyline.from_points([[0, 0], [1, 0], [2, 1], [3, 1], [4, 0]])
    for _ in range(200):
        pos = np.array([rng.uniform(0, 4), rng.uniform(-1, 2)])
        state = init_path_metrics(path, pos)
        start_prog = state.prev_progress
        total_prog = 0.0
        for _ in range(50):
            step_vec = rng.normal(scale=0.05, size=2)
            new_pos = pos + step_vec
            d_dev, d_prog, state = path_metrics(path, state, new_pos)
            assert abs(d_dev) <= np.linalg.norm(step_vec) + 1e-12
            total_prog += d_prog
            pos = new_pos
        assert total_prog == pytest.approx(state.prev_progress - start_prog, abs=1e-12)


def test_path_metrics_ratchet():
    path = PathPolyline.from_points([[0, 0], [4, 0]])
    state = init_path_metrics(path, (2.0, 0.0))
    d_dev, d_prog, state = path_metrics(path, state, (1.0, 0.0), ratchet=True)
    assert d_prog == 0.0  # regression clipped at the running max
    d_dev, d_prog, state = path_metrics(path, state, (2.5, 0.0), ratchet=True)
    assert d_prog == pytest.approx(0.5)
    # Without the ratchet the regression is symmetric.
    state = init_path_metrics(path, (2.0, 0.0))
    _, d_prog, _ = path_metrics(path, state, (1.0, 0.0), ratchet=False)
    assert d_prog == pytest.approx(-1.0)


def test_field_to_pgm():
    world = empty_world(2.0, 1.0)
    field = rasterize_world(world, 0.1, inflate=0.05, goal=(1.5, 0.5))
    solve_harmonic(field)
    data = field_to_pgm(field)
    h, w = field.shape
    assert data.startswith(f"P5\n{w} {h}\n255\n".encode())
    assert len(data) == len(f"P5\n{w} {h}\n255\n") + h * w
    assert field_to_pgm(field) == data  # deterministic
