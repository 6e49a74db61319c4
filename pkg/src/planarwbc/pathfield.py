"""Harmonic potential field over a rasterized world and path metrics.

The world is rasterized onto a square grid (obstacle cells fixed at 1, the
goal cell fixed at 0), Laplace's equation is relaxed over the free cells, and
the reference path is the steepest-descent streamline of the converged
potential. Per-step deviation/progress differences against that path feed the
shaped reward.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .world import WorldGeometry

FREE, OBSTACLE, GOAL = 0, 1, 2

# Potentials are solved in the log domain v = -ln(1 - u). Far from the goal
# 1 - u decays exponentially and underflows double precision, which leaves
# the raw potential flat at 1.0 with noise-level gradients; v keeps O(1)
# slopes everywhere and has the same steepest-descent streamlines. Obstacle
# cells carry this sentinel (exp(-750) underflows to 0, so u is exactly 1).
LOG_OBSTACLE = 750.0


@dataclass
class GridField:
    """Discretized potential: values[row, col] with row ~ y, col ~ x."""

    origin: tuple[float, float]
    cell_size: float
    kind: np.ndarray  # uint8 (H, W)
    values: np.ndarray  # float (H, W), u in [0, 1]
    goal_cell: tuple[int, int]  # (row, col)
    log_values: np.ndarray | None = None  # float (H, W), v = -ln(1 - u)

    @property
    def shape(self) -> tuple[int, int]:
        return self.kind.shape

    def cell_of(self, p) -> tuple[int, int]:
        col = int(math.floor((p[0] - self.origin[0]) / self.cell_size))
        row = int(math.floor((p[1] - self.origin[1]) / self.cell_size))
        return row, col

    def cell_center(self, row: int, col: int) -> np.ndarray:
        return np.array(
            [
                self.origin[0] + (col + 0.5) * self.cell_size,
                self.origin[1] + (row + 0.5) * self.cell_size,
            ]
        )


class FieldError(RuntimeError):
    """Raised for unsolvable rasterizations or failed relaxation/extraction."""


def rasterize_world(world: WorldGeometry, cell_size: float, inflate: float, goal) -> GridField:
    """Build the obstacle/free/goal grid for a world.

    A cell is an obstacle when its center lies within `inflate` of any wall
    segment or inside/within `inflate` of any box; the domain boundary ring is
    always obstacle. Raises FieldError if the goal lands in an obstacle cell.
    """
    if cell_size <= 0.0:
        raise ValueError("cell_size must be > 0")
    xmin, ymin, xmax, ymax = world.bounds
    w = max(3, int(math.ceil((xmax - xmin) / cell_size)))
    h = max(3, int(math.ceil((ymax - ymin) / cell_size)))
    xs = xmin + (np.arange(w) + 0.5) * cell_size
    ys = ymin + (np.arange(h) + 0.5) * cell_size
    cx, cy = np.meshgrid(xs, ys)  # (H, W)

    obstacle = np.zeros((h, w), dtype=bool)
    obstacle[0, :] = obstacle[-1, :] = True
    obstacle[:, 0] = obstacle[:, -1] = True

    for x0, y0, x1, y1 in world.segments:
        ex, ey = x1 - x0, y1 - y0
        den = ex * ex + ey * ey
        if den == 0.0:
            d2 = (cx - x0) ** 2 + (cy - y0) ** 2
        else:
            t = np.clip(((cx - x0) * ex + (cy - y0) * ey) / den, 0.0, 1.0)
            d2 = (cx - (x0 + t * ex)) ** 2 + (cy - (y0 + t * ey)) ** 2
        obstacle |= d2 <= inflate * inflate

    for bxmin, bymin, bxmax, bymax in world.boxes:
        dx = np.maximum(np.maximum(bxmin - cx, 0.0), cx - bxmax)
        dy = np.maximum(np.maximum(bymin - cy, 0.0), cy - bymax)
        obstacle |= dx * dx + dy * dy <= inflate * inflate

    kind = np.where(obstacle, OBSTACLE, FREE).astype(np.uint8)
    field = GridField(
        origin=(xmin, ymin), cell_size=cell_size, kind=kind, values=np.zeros((h, w)),
        goal_cell=(-1, -1),
    )
    grow, gcol = field.cell_of(goal)
    if not (0 <= grow < h and 0 <= gcol < w):
        raise FieldError("goal outside the rasterized domain")
    if kind[grow, gcol] == OBSTACLE:
        raise FieldError("goal inside an obstacle cell")
    kind[grow, gcol] = GOAL
    field.goal_cell = (grow, gcol)
    field.values = np.ones((h, w))
    field.values[grow, gcol] = 0.0
    return field


def cells_connected(field: GridField, start_cell: tuple[int, int]) -> bool:
    """True if the goal cell is 4-connected to start_cell through free cells."""
    h, w = field.shape
    row, col = start_cell
    if not (0 <= row < h and 0 <= col < w) or field.kind[row, col] == OBSTACLE:
        return False
    seen = np.zeros((h, w), dtype=bool)
    seen[row, col] = True
    queue = deque([(row, col)])
    goal = field.goal_cell
    while queue:
        r, c = queue.popleft()
        if (r, c) == goal:
            return True
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] and field.kind[nr, nc] != OBSTACLE:
                seen[nr, nc] = True
                queue.append((nr, nc))
    return False


def _sor_relax(log_values, free, omega, tol, max_iters, check_every=4):
    """Red-black SOR sweeps in the log domain until residuals drop below tol.

    The linear fixed point w = mean(neighbor w) with w = exp(-v) becomes
    v = min_nb + ln 4 - ln(sum exp(min_nb - v_nb)), evaluated with the usual
    max-shift so exponents stay non-positive. Convergence requires both the
    stencil residual of u = 1 - exp(-v) and the relative v update to fall
    below tol.

    Over-relaxation of this soft-min update is only conditionally stable:
    where neighbor values differ sharply (narrow passages, enclosed pockets)
    omega > 1 can limit-cycle. Progress is therefore monitored, and on a
    stall or oscillation the solve deterministically restarts from the same
    initial state at a lower omega, ending at plain Gauss-Seidel, which is
    monotone convergent here from the v = 0 initialization. Free cells must
    be enclosed by a non-free ring (rasterize_world adds one) so the stencil
    can be evaluated with plain array slices.
    """
    if not free.any():
        return 0
    if free[0, :].any() or free[-1, :].any() or free[:, 0].any() or free[:, -1].any():
        raise FieldError("free cells on the grid border; expected an obstacle ring")
    h, w = log_values.shape
    parity = np.add.outer(np.arange(h), np.arange(w)) % 2
    red = free & (parity == 0)
    black = free & (parity == 1)
    nb = log_values.copy()
    ln4 = math.log(4.0)

    def stencil():
        n = log_values[:-2, 1:-1]
        s = log_values[2:, 1:-1]
        wv = log_values[1:-1, :-2]
        e = log_values[1:-1, 2:]
        m = np.minimum(np.minimum(n, s), np.minimum(wv, e))
        # The min-achieving term is exp(0) = 1, so clamping exponents at -50
        # perturbs the sum by < 3e-22 relative while keeping every exp() out
        # of the (pathologically slow) subnormal range.
        total = (
            np.exp(np.maximum(m - n, -50.0))
            + np.exp(np.maximum(m - s, -50.0))
            + np.exp(np.maximum(m - wv, -50.0))
            + np.exp(np.maximum(m - e, -50.0))
        )
        nb[1:-1, 1:-1] = m + ln4 - np.log(total)
        return nb

    def residuals():
        delta = stencil() - log_values
        rel = float(np.max(np.abs(delta) / (1.0 + np.abs(log_values)), initial=0.0,
                           where=free))
        # Exactly |u_new - u| = exp(-v) * |expm1(-(v_new - v))|; the clamps
        # (avoiding subnormals again) only overestimate far-cell terms, which
        # sit many orders below tol either way.
        w_cur = np.exp(np.maximum(-log_values, -50.0))
        u_res = float(np.max(np.abs(np.expm1(-np.clip(delta, -50.0, 50.0))) * w_cur,
                             initial=0.0, where=free))
        return rel, u_res

    init = log_values.copy()
    ladder = [omega] + [o for o in (1.5, 1.25, 1.0) if o < omega - 1e-9]
    # A cold start needs about (h + w) / 2 sweeps just to propagate values
    # across the grid before residuals can fall, so the stall window scales
    # with the grid diameter.
    stall_window = max(10, (h + w) // check_every)
    total_sweeps = 0
    for attempt, om in enumerate(ladder):
        if attempt > 0:
            np.copyto(log_values, init)
        best = math.inf
        best_check = 0
        check = 0
        oscillating = 0
        while total_sweeps < max_iters:
            # Over-relaxed iterates are projected back into the physical
            # range [0, LOG_OBSTACLE] (w in [exp(-LOG_OBSTACLE), 1]); without
            # the projection omega > 1 overshoots unboundedly.
            np.copyto(
                log_values,
                np.clip(log_values + om * (stencil() - log_values), 0.0, LOG_OBSTACLE),
                where=red,
            )
            np.copyto(
                log_values,
                np.clip(log_values + om * (stencil() - log_values), 0.0, LOG_OBSTACLE),
                where=black,
            )
            total_sweeps += 1
            if total_sweeps % check_every == 0 or total_sweeps == max_iters:
                rel, u_res = residuals()
                if rel < tol and u_res < tol:
                    return total_sweeps
                check += 1
                score = max(rel, u_res)
                if score < 0.95 * best:
                    best = score
                    best_check = check
                # Residuals bouncing well above the best seen mean a limit
                # cycle, not slow convergence; drop omega without waiting out
                # the stall window. The tol floor keeps noise-level wobble
                # near convergence from triggering a pointless restart.
                oscillating = oscillating + 1 if score > max(2.0 * best, 100.0 * tol) else 0
                last = attempt + 1 == len(ladder)
                if not last and (oscillating >= 3 or check - best_check >= stall_window):
                    break
    raise FieldError(f"SOR did not converge below {tol} in {max_iters} iterations")


def solve_harmonic(
    field: GridField,
    omega: float = 1.8,
    tol: float = 1e-10,
    max_iters: int = 200_000,
    warm_start: bool = True,
) -> GridField:
    """Relax Laplace's equation over the free cells (obstacle=1, goal=0).

    Iterates in the log domain (see LOG_OBSTACLE) and stores both the raw
    potential in .values and the log potential in .log_values. warm_start
    seeds the fine grid from a coarsened solve cascade, which cuts the sweep
    count on large grids; the convergence criterion at the full resolution is
    unchanged.
    """
    gr, gc = field.goal_cell
    h, w = field.shape
    adjacent_free = False
    for nr, nc in ((gr - 1, gc), (gr + 1, gc), (gr, gc - 1), (gr, gc + 1)):
        if 0 <= nr < h and 0 <= nc < w and field.kind[nr, nc] == FREE:
            adjacent_free = True
    if not adjacent_free:
        raise FieldError("no free cell adjacent to the goal cell")

    free = field.kind == FREE
    log_values = np.full((h, w), LOG_OBSTACLE)
    log_values[free] = 0.0
    log_values[gr, gc] = 0.0

    if warm_start and min(h, w) >= 16:
        coarse = _coarse_solution(field, omega, tol, max_iters)
        if coarse is not None:
            log_values[free] = coarse[free]
    _sor_relax(log_values, free, omega, tol, max_iters)
    field.log_values = log_values
    field.values = -np.expm1(-log_values)
    return field


def _coarse_solution(field: GridField, omega, tol, max_iters):
    """Solve a 2x-coarsened copy and prolong its log potential, or None.

    Each level runs its own omega ladder: conservative coarsening can close
    passages and create pockets that destabilize an omega the finer level
    tolerates, so stability does not transfer between levels.
    """
    h, w = field.shape
    ch, cw = (h + 1) // 2, (w + 1) // 2
    kind = field.kind
    coarse_kind = np.full((ch, cw), FREE, dtype=np.uint8)
    # Conservative coarsening: obstacle if any child cell is obstacle.
    for dr in (0, 1):
        for dc in (0, 1):
            block = kind[dr::2, dc::2]
            coarse_kind[: block.shape[0], : block.shape[1]] = np.where(
                block == OBSTACLE, OBSTACLE, coarse_kind[: block.shape[0], : block.shape[1]]
            )
    gr, gc = field.goal_cell
    cgr, cgc = gr // 2, gc // 2
    if coarse_kind[cgr, cgc] == OBSTACLE:
        return None
    coarse_kind[cgr, cgc] = GOAL
    coarse = GridField(
        origin=field.origin,
        cell_size=field.cell_size * 2.0,
        kind=coarse_kind,
        values=np.zeros((ch, cw)),
        goal_cell=(cgr, cgc),
    )
    try:
        solve_harmonic(coarse, omega=omega, tol=max(tol, 1e-8), max_iters=max_iters,
                       warm_start=min(ch, cw) >= 16)
    except FieldError:
        return None
    # Prolong by sampling the coarse bilinear log surface at fine centers.
    out = np.full((h, w), LOG_OBSTACLE)
    rows, cols = np.nonzero(kind != OBSTACLE)
    px = field.origin[0] + (cols + 0.5) * field.cell_size
    py = field.origin[1] + (rows + 0.5) * field.cell_size
    out[rows, cols] = np.clip(
        _bilinear_many(coarse, coarse.log_values, px, py), 0.0, LOG_OBSTACLE
    )
    out[gr, gc] = 0.0
    return out


def _bilinear_many(field: GridField, arr, px, py):
    gx = (px - field.origin[0]) / field.cell_size - 0.5
    gy = (py - field.origin[1]) / field.cell_size - 0.5
    h, w = field.shape
    gx = np.clip(gx, 0.0, w - 1.000001)
    gy = np.clip(gy, 0.0, h - 1.000001)
    ix = np.floor(gx).astype(int)
    iy = np.floor(gy).astype(int)
    fx = gx - ix
    fy = gy - iy
    return (
        arr[iy, ix] * (1 - fx) * (1 - fy)
        + arr[iy, ix + 1] * fx * (1 - fy)
        + arr[iy + 1, ix] * (1 - fx) * fy
        + arr[iy + 1, ix + 1] * fx * fy
    )


def _bilinear_with_gradient(field: GridField, p, arr=None):
    h, w = field.shape
    gx = (p[0] - field.origin[0]) / field.cell_size - 0.5
    gy = (p[1] - field.origin[1]) / field.cell_size - 0.5
    gx = min(max(gx, 0.0), w - 1.000001)
    gy = min(max(gy, 0.0), h - 1.000001)
    ix, iy = int(gx), int(gy)
    fx, fy = gx - ix, gy - iy
    v = field.values if arr is None else arr
    v00, v10 = v[iy, ix], v[iy, ix + 1]
    v01, v11 = v[iy + 1, ix], v[iy + 1, ix + 1]
    value = v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) + v01 * (1 - fx) * fy + v11 * fx * fy
    dx = ((v10 - v00) * (1 - fy) + (v11 - v01) * fy) / field.cell_size
    dy = ((v01 - v00) * (1 - fx) + (v11 - v10) * fx) / field.cell_size
    return value, dx, dy


@dataclass
class PathPolyline:
    """Ordered reference path with cumulative arc length per vertex."""

    points: np.ndarray  # (P, 2)
    cumlen: np.ndarray  # (P,), cumlen[0] == 0
    total_length: float

    @classmethod
    def from_points(cls, points) -> "PathPolyline":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        keep = [0]
        for i in range(1, len(pts)):
            if np.linalg.norm(pts[i] - pts[keep[-1]]) > 1e-12:
                keep.append(i)
        pts = pts[keep]
        if len(pts) < 2:
            raise ValueError("a path needs at least two distinct points")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        return cls(points=pts, cumlen=cum, total_length=float(cum[-1]))


def extract_path(field: GridField, start, goal=None) -> PathPolyline:
    """Steepest-descent streamline from start to the goal cell.

    Steps of half a cell down the bilinear potential until the goal cell is
    entered; the exact goal point (when given) is appended as the final
    vertex. Descent runs on the log potential when the field carries one,
    whose streamlines match the raw potential's but whose gradients stay
    resolvable far from the goal. Raises FieldError on a stalled gradient or
    an over-long path.
    """
    row, col = field.cell_of(start)
    h, w = field.shape
    if not (0 <= row < h and 0 <= col < w) or field.kind[row, col] == OBSTACLE:
        raise FieldError("path start is not in a free cell")
    surface = field.log_values if field.log_values is not None else field.values
    step = field.cell_size / 2.0
    span_x = w * field.cell_size
    span_y = h * field.cell_size
    max_steps = int(4.0 * 2.0 * (span_x + span_y) / step)
    p = np.array([float(start[0]), float(start[1])])
    points = [p.copy()]
    for _ in range(max_steps):
        if field.cell_of(p) == field.goal_cell:
            if goal is not None:
                points.append(np.array([float(goal[0]), float(goal[1])]))
            return PathPolyline.from_points(points)
        _, dx, dy = _bilinear_with_gradient(field, p, surface)
        norm = math.hypot(dx, dy)
        if norm < 1e-12:
            raise FieldError("descent stalled; re-solve the field at a tighter tolerance")
        p = p - (step / norm) * np.array([dx, dy])
        points.append(p.copy())
    raise FieldError("path length cap exceeded before reaching the goal cell")


@dataclass
class PathMetricsState:
    """Per-episode memory for deviation/progress differencing."""

    prev_deviation: float
    prev_progress: float
    max_progress: float


def project_on_path(path: PathPolyline, p) -> tuple[float, float]:
    """(deviation, arc length) of the nearest point on the polyline.

    Exact distance ties are broken toward the larger arc length.
    """
    a = path.points[:-1]
    b = path.points[1:]
    d = b - a
    den = np.einsum("ij,ij->i", d, d)
    pv = np.asarray(p, dtype=float) - a
    t = np.where(den > 0.0, np.einsum("ij,ij->i", pv, d) / np.where(den > 0, den, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist2 = np.einsum("ij,ij->i", proj - p, proj - p)
    best = float(dist2.min())
    arcs = path.cumlen[:-1] + t * np.sqrt(den)
    candidates = arcs[dist2 <= best]
    return math.sqrt(best), float(candidates.max())


def init_path_metrics(path: PathPolyline, start_pos) -> PathMetricsState:
    dev, prog = project_on_path(path, start_pos)
    return PathMetricsState(prev_deviation=dev, prev_progress=prog, max_progress=prog)


def path_metrics(
    path: PathPolyline,
    state: PathMetricsState,
    ee_pos,
    ratchet: bool = False,
) -> tuple[float, float, PathMetricsState]:
    """Per-step deviation and progress differences for the reward.

    With ratchet=True progress is clipped to its running maximum, so backward
    motion yields a zero difference until the maximum is reattained.
    """
    dev, prog = project_on_path(path, ee_pos)
    max_prog = max(state.max_progress, prog)
    if ratchet:
        prog = max_prog
    d_dev = dev - state.prev_deviation
    d_prog = prog - state.prev_progress
    return d_dev, d_prog, PathMetricsState(dev, prog, max_prog)


def field_to_pgm(field: GridField) -> bytes:
    """Render the potential as a binary PGM (dark = low potential)."""
    h, w = field.shape
    img = np.clip(field.values, 0.0, 1.0)
    gray = np.round(img * 255.0).astype(np.uint8)
    # Flip so +y points up in the image.
    gray = gray[::-1, :]
    header = f"P5\n{w} {h}\n255\n".encode()
    return header + gray.tobytes()
