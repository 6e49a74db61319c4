"""Procedural goal-reaching scenes and the episode state machine.

Two scene families are generated: a corridor with staggered wall-attached
obstacles that always leaves a guaranteed passage, and a two-room gap scene
whose goal sits inside a tunnel too narrow for the base, so only an inserted
arm can reach it. Episodes advance with clamped (or baseline) dynamics,
raycast scans, a harmonic-field reference path, the shaped reward, and a
single termination reason per episode.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import pathfield, reward as reward_mod
from .geometry import rot2d, wrap_angle
from .pathfield import (
    GridField,
    PathMetricsState,
    PathPolyline,
    cells_connected,
    extract_path,
    init_path_metrics,
    path_metrics,
    rasterize_world,
    solve_harmonic,
)
from .reward import RewardParams, RewardState
from .robot import Action, RobotConfig, RobotState, end_effector_pose, forward_kinematics, step_dynamics
from .world import (
    WorldGeometry,
    body_obstacle_clearance,
    cast_lidar,
    collision_check,
    min_clearance_point,
)

ENV_KINDS = ("corridor", "gap_train", "gap_test")
GRID_CELL = 0.05


@dataclass(frozen=True)
class EnvSpec:
    """Scene-family selector plus the sampling ranges of its generator."""

    kind: str = "corridor"
    corridor_length_range: tuple[float, float] = (6.0, 12.0)
    corridor_width_range: tuple[float, float] = (1.5, 2.5)
    corridor_obstacle_count: tuple[int, int] = (0, 4)
    corridor_min_passage: float = 0.7
    gap_width_range: tuple[float, float] = (0.3, 0.3)
    gap_length_range: tuple[float, float] = (0.5, 0.5)
    gap_goal_depth_range: tuple[float, float] = (0.4, 0.4)
    gap_goal_lateral_noise: float = 0.05
    gap_goal_angle_noise: float = 0.5
    gap_joint_noise: float = 0.1

    @classmethod
    def gap_train(cls) -> "EnvSpec":
        return cls(kind="gap_train")

    @classmethod
    def gap_test(cls) -> "EnvSpec":
        return cls(
            kind="gap_test",
            gap_width_range=(0.25, 0.4),
            gap_length_range=(0.3, 0.8),
            gap_goal_depth_range=(0.4, 0.6),
        )

    def validate(self, robot: RobotConfig | None = None) -> list[str]:
        errors = []
        if self.kind not in ENV_KINDS:
            errors.append(f"kind must be one of {ENV_KINDS}")
        for name in ("corridor_length_range", "corridor_width_range", "gap_width_range",
                     "gap_length_range", "gap_goal_depth_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo <= hi):
                errors.append(f"{name} must satisfy 0 < lo <= hi")
        lo, hi = self.corridor_obstacle_count
        if not 0 <= lo <= hi:
            errors.append("corridor_obstacle_count must satisfy 0 <= lo <= hi")
        if robot is not None:
            base_diameter = 2.0 * robot.base_radius
            if self.corridor_min_passage < base_diameter + 0.1:
                errors.append(
                    f"corridor_min_passage must be >= base diameter + 0.1 = {base_diameter + 0.1}"
                )
            wlo, whi = self.gap_width_range
            if not (2.0 * robot.link_capsule_radius + 0.05 < wlo and whi < base_diameter):
                errors.append(
                    "gap_width_range must lie within "
                    f"({2.0 * robot.link_capsule_radius + 0.05}, {base_diameter})"
                )
        return errors


@dataclass(frozen=True)
class EpisodeConfig:
    """Per-episode timing, tolerance, and reward variant."""

    tolerance: float = 0.3
    hold_time: float = 1.0
    time_limit: float = 60.0
    timestep: float = 0.04
    variant: str = "clamping"
    # Planning resolution: rasterization cell size for the reference path.
    grid_cell: float = GRID_CELL
    # Ablation switch: clip path progress to its running maximum so
    # backtracking yields zero (instead of negative) progress reward.
    progress_ratchet: bool = False

    def validate(self) -> list[str]:
        errors = []
        if not 0.05 <= self.tolerance <= 0.5:
            errors.append("tolerance must be in [0.05, 0.5]")
        if self.timestep <= 0.0:
            errors.append("timestep must be > 0")
        if not 0.0 < self.hold_time < self.time_limit:
            errors.append("need 0 < hold_time < time_limit")
        if self.variant not in reward_mod.VARIANTS:
            errors.append(f"variant must be one of {reward_mod.VARIANTS}")
        if not 0.0 < self.grid_cell <= 0.2:
            errors.append("grid_cell must be in (0, 0.2] to resolve passages")
        return errors


@dataclass
class Observation:
    """Per-step agent inputs; scans normalized by the LIDAR max range."""

    front_scan: np.ndarray
    rear_scan: np.ndarray
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    base_vel: np.ndarray
    goal_in_ee: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.front_scan,
                self.rear_scan,
                self.joint_pos,
                self.joint_vel,
                self.base_vel,
                self.goal_in_ee,
            ]
        )


@dataclass
class StepOutcome:
    observation: Observation
    reward: float
    terminated: str | None
    info: dict


def build_observation(
    config: RobotConfig, state: RobotState, world: WorldGeometry, goal_pose
) -> Observation:
    """Scans plus proprioception plus the goal expressed in the EE frame."""
    front = cast_lidar(config, state, world, sensor="front")
    rear = cast_lidar(config, state, world, sensor="rear")
    max_range = config.lidar.max_range
    ee_x, ee_y, ee_phi = end_effector_pose(config, state)
    rel = rot2d(-ee_phi) @ np.array([goal_pose[0] - ee_x, goal_pose[1] - ee_y])
    goal_in_ee = np.array([rel[0], rel[1], wrap_angle(goal_pose[2] - ee_phi)])
    return Observation(
        front_scan=np.clip(front.ranges / max_range, 0.0, 1.0),
        rear_scan=np.clip(rear.ranges / max_range, 0.0, 1.0),
        joint_pos=state.joint_pos.copy(),
        joint_vel=state.joint_vel.copy(),
        base_vel=state.base_vel.copy(),
        goal_in_ee=goal_in_ee,
    )


def observation_size(config: RobotConfig) -> int:
    return 2 * config.lidar.beams + 2 * config.num_joints + 3 + 3


# ---------------------------------------------------------------------------
# Scene generators
# ---------------------------------------------------------------------------

class GenerationError(RuntimeError):
    """Raised when a generator exhausts its retry budget."""


def _base_cell_near_goal_reachable(
    world: WorldGeometry, robot: RobotConfig, spawn_xy, goal_xy, approach: float
) -> bool:
    """BFS on the base-radius-inflated grid: spawn connects to the goal area."""
    try:
        raster = rasterize_world(world, GRID_CELL, inflate=robot.base_radius, goal=spawn_xy)
    except pathfield.FieldError:
        return False
    start = raster.cell_of(spawn_xy)
    h, w = raster.shape
    if raster.kind[start[0], start[1]] == pathfield.OBSTACLE:
        return False
    seen = np.zeros((h, w), dtype=bool)
    seen[start[0], start[1]] = True
    stack = [start]
    while stack:
        r, c = stack.pop()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] \
                    and raster.kind[nr, nc] != pathfield.OBSTACLE:
                seen[nr, nc] = True
                stack.append((nr, nc))
    rows, cols = np.nonzero(seen)
    if rows.size == 0:
        return False
    cx = raster.origin[0] + (cols + 0.5) * raster.cell_size
    cy = raster.origin[1] + (rows + 0.5) * raster.cell_size
    d2 = (cx - goal_xy[0]) ** 2 + (cy - goal_xy[1]) ** 2
    return bool(np.min(d2) <= approach * approach)


def _ee_path_exists(world: WorldGeometry, robot: RobotConfig, ee_xy, goal_xy) -> bool:
    """BFS connectivity on the capsule-inflated grid from EE start to goal."""
    try:
        raster = rasterize_world(world, GRID_CELL, inflate=robot.link_capsule_radius, goal=goal_xy)
    except pathfield.FieldError:
        return False
    return cells_connected(raster, raster.cell_of(ee_xy))


def generate_corridor(
    spec: EnvSpec, robot: RobotConfig, rng: np.random.Generator
) -> tuple[WorldGeometry, RobotState, np.ndarray]:
    """Corridor scene: walls, staggered obstacles, near-end spawn, far goal.

    Obstacles alternate between the bottom and top walls with bounded depth
    and a guaranteed longitudinal gap, so a passage of at least
    corridor_min_passage always remains. Returns (world, start state, goal
    pose); raises GenerationError after 100 rejected attempts.
    """
    if spec.kind != "corridor":
        raise ValueError(f"generate_corridor needs kind='corridor', got {spec.kind!r}")
    min_passage = spec.corridor_min_passage
    for _ in range(100):
        length = rng.uniform(*spec.corridor_length_range)
        width = rng.uniform(*spec.corridor_width_range)
        walls = np.array(
            [
                [0.0, 0.0, length, 0.0],
                [length, 0.0, length, width],
                [length, width, 0.0, width],
                [0.0, width, 0.0, 0.0],
            ]
        )
        spawn_xy = np.array([0.7, width / 2.0])
        start = RobotState.zeros(robot, base_pose=(spawn_xy[0], spawn_xy[1], 0.0))
        ee_xy = np.asarray(forward_kinematics(robot, start)[-1][:2])

        # Obstacle zone keeps clear of the spawn arm and the goal third.
        slot = 0.8 + min_passage + 0.1  # max obstacle width + guaranteed gap
        zone_lo = ee_xy[0] + 0.3
        zone_hi = min(length - 1.6, 2.0 * length / 3.0 - 0.9)
        n_fit = max(0, int((zone_hi - zone_lo) / slot))
        count = int(rng.integers(spec.corridor_obstacle_count[0],
                                 spec.corridor_obstacle_count[1] + 1))
        count = min(count, n_fit)
        boxes = []
        max_depth = width - min_passage - 0.1
        for k in range(count):
            w_k = rng.uniform(0.3, 0.8)
            center = zone_lo + (k + 0.5) * (zone_hi - zone_lo) / max(count, 1)
            jitter_span = ((zone_hi - zone_lo) / max(count, 1) - w_k - (min_passage + 0.1)) / 2.0
            center += rng.uniform(-1.0, 1.0) * max(0.0, jitter_span)
            depth = rng.uniform(0.3, max(0.3, max_depth))
            x0, x1 = center - w_k / 2.0, center + w_k / 2.0
            if k % 2 == 0:
                boxes.append([x0, 0.0, x1, depth])
            else:
                boxes.append([x0, width - depth, x1, width])
        world = WorldGeometry(
            segments=walls,
            boxes=np.array(boxes).reshape(-1, 4),
            bounds=(0.0, 0.0, length, width),
        )

        margin = min_passage / 2.0 + 0.01
        goal = np.array(
            [
                rng.uniform(2.0 * length / 3.0, length - 0.5),
                rng.uniform(margin, width - margin),
                0.0,
            ]
        )
        if min_clearance_point(world, goal[:2]) < margin:
            continue
        if collision_check(robot, start, world):
            continue
        if not _ee_path_exists(world, robot, ee_xy, goal[:2]):
            continue
        if not _base_cell_near_goal_reachable(world, robot, spawn_xy, goal[:2], approach=0.8):
            continue
        return world, start, goal
    raise GenerationError("corridor generation failed 100 times; check spec ranges")


GAP_ROOM = (6.0, 4.0)
# Side-fold that keeps the distal links clear of the base disk while pulling
# the end-effector within ~0.48 m of the base center.
GAP_SPAWN_JOINTS = (1.4, 1.0, 1.0)


def generate_gap(
    spec: EnvSpec, robot: RobotConfig, rng: np.random.Generator
) -> tuple[WorldGeometry, RobotState, np.ndarray]:
    """Two rooms split by a thick wall with a tunnel slot; goal in the slot.

    The slot is narrower than the base, so the goal is only reachable by
    inserting the arm; the spawn arm is folded (plus joint noise) and the
    generator enforces that no base-reachable position brings that folded
    end-effector within holding range of the goal.
    """
    if spec.kind not in ("gap_train", "gap_test"):
        raise ValueError(f"generate_gap needs a gap kind, got {spec.kind!r}")
    room_l, room_w = GAP_ROOM
    slot_y = room_w / 2.0
    for _ in range(100):
        gap = rng.uniform(*spec.gap_width_range)
        tunnel = rng.uniform(*spec.gap_length_range)
        depth = rng.uniform(*spec.gap_goal_depth_range)
        depth = min(depth, tunnel + 0.1)
        lateral = rng.uniform(-spec.gap_goal_lateral_noise, spec.gap_goal_lateral_noise)
        angle = rng.uniform(-spec.gap_goal_angle_noise, spec.gap_goal_angle_noise)
        noise = rng.uniform(-spec.gap_joint_noise, spec.gap_joint_noise, size=robot.num_joints)

        wall_x0 = room_l / 2.0 - tunnel / 2.0
        walls = np.array(
            [
                [0.0, 0.0, room_l, 0.0],
                [room_l, 0.0, room_l, room_w],
                [room_l, room_w, 0.0, room_w],
                [0.0, room_w, 0.0, 0.0],
            ]
        )
        boxes = np.array(
            [
                [wall_x0, 0.0, wall_x0 + tunnel, slot_y - gap / 2.0],
                [wall_x0, slot_y + gap / 2.0, wall_x0 + tunnel, room_w],
            ]
        )
        world = WorldGeometry(segments=walls, boxes=boxes, bounds=(0.0, 0.0, room_l, room_w))

        start = RobotState.zeros(robot, base_pose=(1.2, slot_y, 0.0))
        start.joint_pos = np.array(GAP_SPAWN_JOINTS[: robot.num_joints]) + noise
        if collision_check(robot, start, world):
            continue
        ee = np.asarray(forward_kinematics(robot, start)[-1][:2])
        folded_reach = float(np.hypot(ee[0] - start.base_pose[0], ee[1] - start.base_pose[1]))

        lateral_cap = gap / 2.0 - robot.link_capsule_radius - 0.05
        goal = np.array(
            [wall_x0 + depth, slot_y + max(-lateral_cap, min(lateral_cap, lateral)), angle]
        )
        # Worst-case base approach: poking into the slot mouth on its axis.
        poke = math.sqrt(max(0.0, robot.base_radius**2 - (gap / 2.0) ** 2))
        if depth + poke < folded_reach + 0.05 + 0.01:
            continue
        # Straight-arm insertion must still reach the goal.
        closest_base = math.sqrt(max(0.0, (robot.base_radius + 0.01) ** 2 - (gap / 2.0) ** 2))
        if depth > robot.max_reach - closest_base - 0.05:
            continue
        if not _ee_path_exists(world, robot, ee, goal[:2]):
            continue
        return world, start, goal
    raise GenerationError("gap generation failed 100 times; check spec ranges")


def generate_scene(
    spec: EnvSpec, robot: RobotConfig, rng: np.random.Generator
) -> tuple[WorldGeometry, RobotState, np.ndarray]:
    if spec.kind == "corridor":
        return generate_corridor(spec, robot, rng)
    return generate_gap(spec, robot, rng)


def passage_width_along_path(
    world: WorldGeometry,
    path: PathPolyline,
    spacing: float = 0.05,
    lateral_span: float = 1.5,
    lateral_step: float = 0.02,
) -> float:
    """Minimum free-passage width probed along a path.

    At probe points every `spacing` of arc, the passage is twice the best
    obstacle clearance found on the lateral line through the point, i.e. the
    widest disk that fits in the cross-section the path threads. Probes
    outside the world bounds are skipped: space beyond the boundary walls is
    not passage even though it is far from every obstacle surface.
    """
    n = max(2, int(math.ceil(path.total_length / spacing)) + 1)
    arcs = np.linspace(0.0, path.total_length, n)
    points = np.empty((n, 2))
    idx = np.clip(np.searchsorted(path.cumlen, arcs, side="right") - 1, 0, len(path.points) - 2)
    seg_len = path.cumlen[idx + 1] - path.cumlen[idx]
    t = np.where(seg_len > 0, (arcs - path.cumlen[idx]) / np.where(seg_len > 0, seg_len, 1.0), 0.0)
    points = path.points[idx] + t[:, None] * (path.points[idx + 1] - path.points[idx])

    directions = np.zeros((n, 2))
    directions[:-1] = path.points[idx + 1][:-1] - path.points[idx][:-1]
    directions[-1] = directions[-2]
    norms = np.linalg.norm(directions, axis=1)
    directions = directions / np.where(norms > 0, norms, 1.0)[:, None]
    normals = np.stack([-directions[:, 1], directions[:, 0]], axis=1)

    offsets = np.arange(-lateral_span, lateral_span + lateral_step / 2, lateral_step)
    xmin, ymin, xmax, ymax = world.bounds
    worst = math.inf
    for p, nrm in zip(points, normals):
        probes = p[None, :] + offsets[:, None] * nrm[None, :]
        inside = (
            (probes[:, 0] >= xmin)
            & (probes[:, 0] <= xmax)
            & (probes[:, 1] >= ymin)
            & (probes[:, 1] <= ymax)
        )
        best = max((min_clearance_point(world, q) for q in probes[inside]), default=0.0)
        worst = min(worst, 2.0 * best)
    return worst


# ---------------------------------------------------------------------------
# Episode state machine
# ---------------------------------------------------------------------------

@dataclass
class Episode:
    """One rollout's full mutable state; step it with env_step."""

    robot: RobotConfig
    world: WorldGeometry
    goal_pose: np.ndarray
    config: EpisodeConfig
    params: RewardParams
    state: RobotState
    path: PathPolyline
    path_field: GridField
    path_length_init: float
    initial_progress: float
    reward_state: RewardState
    path_state: PathMetricsState
    required_hold_steps: int
    max_steps: int
    step_count: int = 0
    hold_steps: int = 0
    terminated: str | None = None

    def observation(self) -> Observation:
        return build_observation(self.robot, self.state, self.world, self.goal_pose)


def make_episode(
    robot: RobotConfig,
    params: RewardParams,
    config: EpisodeConfig,
    world: WorldGeometry,
    start: RobotState,
    goal_pose,
    cell_size: float | None = None,
    plan_from=None,
) -> Episode:
    """Plan the reference path for a scene and assemble fresh episode state.

    cell_size defaults to config.grid_cell. plan_from overrides the path's
    start point (default: the end-effector position of `start`); checkpoint
    restoration uses it to replant the path from the original spawn while
    `start` holds the current robot state.
    """
    issues = config.validate()
    if issues:
        raise ValueError("; ".join(issues))
    goal_pose = np.asarray(goal_pose, dtype=float)
    raster = rasterize_world(world, config.grid_cell if cell_size is None else cell_size,
                             inflate=robot.link_capsule_radius, goal=goal_pose[:2])
    solve_harmonic(raster)
    if plan_from is None:
        ee_xy = np.asarray(forward_kinematics(robot, start)[-1][:2])
    else:
        ee_xy = np.asarray(plan_from, dtype=float)
    path = extract_path(raster, ee_xy, goal=goal_pose[:2])
    path_state = init_path_metrics(path, ee_xy)
    initial_progress = path_state.prev_progress
    path_length_init = max(path.total_length - initial_progress, 1e-9)
    params = replace(
        params,
        timestep=config.timestep,
        episode_time_limit=config.time_limit,
        hold_duration=config.hold_time,
        variant=config.variant,
    )
    return Episode(
        robot=robot,
        world=world,
        goal_pose=goal_pose,
        config=config,
        params=params,
        state=start.copy(),
        path=path,
        path_field=raster,
        path_length_init=path_length_init,
        initial_progress=initial_progress,
        reward_state=reward_mod.reset_state(config.tolerance, path_state),
        path_state=path_state,
        required_hold_steps=int(math.ceil(config.hold_time / config.timestep - 1e-9)),
        max_steps=int(math.ceil(config.time_limit / config.timestep - 1e-9)),
    )


def new_episode(
    spec: EnvSpec,
    robot: RobotConfig,
    params: RewardParams,
    config: EpisodeConfig,
    rng: np.random.Generator,
) -> Episode:
    world, start, goal_pose = generate_scene(spec, robot, rng)
    return make_episode(robot, params, config, world, start, goal_pose)


def env_step(episode: Episode, action: Action) -> StepOutcome:
    """Advance one control period and emit reward, observation, termination.

    Termination reasons are checked in a fixed priority order (collision,
    timeout, joint limit, success); the terminal bonus is folded into the
    final step's reward and stepping a finished episode raises.
    """
    if episode.terminated is not None:
        raise RuntimeError(f"episode already terminated: {episode.terminated}")
    cfg = episode.config
    new_state, limit_hit = step_dynamics(
        episode.robot,
        episode.state,
        action,
        cfg.timestep,
        clamping_enabled=(cfg.variant == "clamping"),
    )
    episode.state = new_state
    episode.step_count += 1

    collided = collision_check(episode.robot, new_state, episode.world)
    ee_x, ee_y, _ = end_effector_pose(episode.robot, new_state)
    d_goal = float(np.hypot(ee_x - episode.goal_pose[0], ee_y - episode.goal_pose[1]))
    episode.hold_steps = episode.hold_steps + 1 if d_goal <= cfg.tolerance else 0

    d_dev, d_prog, episode.path_state = path_metrics(
        episode.path, episode.path_state, (ee_x, ee_y), ratchet=cfg.progress_ratchet
    )
    clearance = math.inf
    if cfg.variant == "baseline":
        obs_probe = build_observation(episode.robot, new_state, episode.world, episode.goal_pose)
        scan_min = float(
            min(obs_probe.front_scan.min(), obs_probe.rear_scan.min())
        ) * episode.robot.lidar.max_range
        clearance = min(scan_min, body_obstacle_clearance(episode.robot, new_state, episode.world))
    step_reward, episode.reward_state, breakdown = reward_mod.compute_step_reward(
        episode.params,
        episode.reward_state,
        d_dev,
        d_prog,
        episode.path_length_init,
        d_goal,
        min_obstacle_clearance=clearance,
    )

    terminated = None
    if collided:
        terminated = "collision"
    elif episode.step_count >= episode.max_steps:
        terminated = "timeout"
    elif limit_hit and cfg.variant == "baseline":
        terminated = "joint_limit"
    elif episode.hold_steps >= episode.required_hold_steps:
        terminated = "success"
    if terminated is not None:
        step_reward += reward_mod.terminal_reward(episode.params, terminated)
        episode.terminated = terminated

    info = {
        "goal_distance": d_goal,
        "hold_time": episode.hold_steps * cfg.timestep,
        "path_deviation": episode.path_state.prev_deviation,
        "path_progress_fraction": (
            (episode.path_state.prev_progress - episode.initial_progress)
            / episode.path_length_init
        ),
        "reward_terms": breakdown,
    }
    return StepOutcome(
        observation=episode.observation(),
        reward=step_reward,
        terminated=terminated,
        info=info,
    )


# ---------------------------------------------------------------------------
# Episode persistence (training checkpoints)
# ---------------------------------------------------------------------------

def episode_to_dict(episode: Episode) -> dict:
    """JSON-serializable mid-episode snapshot.

    The harmonic field and path polyline are not stored; they are re-derived
    from (world, goal, original plan start) on restore, which is exact because
    the solve and extraction are deterministic.
    """
    st = episode.state
    return {
        "world": {
            "segments": episode.world.segments.tolist(),
            "boxes": episode.world.boxes.tolist(),
            "bounds": list(episode.world.bounds),
        },
        "goal_pose": episode.goal_pose.tolist(),
        "config": asdict(episode.config),
        "state": {
            "base_pose": st.base_pose.tolist(),
            "base_vel": st.base_vel.tolist(),
            "joint_pos": st.joint_pos.tolist(),
            "joint_vel": st.joint_vel.tolist(),
        },
        "plan_start": episode.path.points[0].tolist(),
        "path_state": {
            "prev_deviation": episode.path_state.prev_deviation,
            "prev_progress": episode.path_state.prev_progress,
            "max_progress": episode.path_state.max_progress,
        },
        "reward_state": {
            "hold_accumulator": episode.reward_state.hold_accumulator,
            "inside_tolerance": episode.reward_state.inside_tolerance,
        },
        "step_count": episode.step_count,
        "hold_steps": episode.hold_steps,
        "terminated": episode.terminated,
    }


def episode_from_dict(robot: RobotConfig, params: RewardParams, data: dict) -> Episode:
    """Rebuild a mid-episode snapshot written by episode_to_dict."""
    world = WorldGeometry(
        segments=np.asarray(data["world"]["segments"], dtype=float).reshape(-1, 4),
        boxes=np.asarray(data["world"]["boxes"], dtype=float).reshape(-1, 4),
        bounds=tuple(data["world"]["bounds"]),
    )
    config = EpisodeConfig(**data["config"])
    st = RobotState(
        base_pose=np.asarray(data["state"]["base_pose"], dtype=float),
        base_vel=np.asarray(data["state"]["base_vel"], dtype=float),
        joint_pos=np.asarray(data["state"]["joint_pos"], dtype=float),
        joint_vel=np.asarray(data["state"]["joint_vel"], dtype=float),
    )
    episode = make_episode(
        robot, params, config, world, st, np.asarray(data["goal_pose"], dtype=float),
        plan_from=data["plan_start"],
    )
    ps = data["path_state"]
    episode.path_state = PathMetricsState(
        prev_deviation=ps["prev_deviation"],
        prev_progress=ps["prev_progress"],
        max_progress=ps["max_progress"],
    )
    rs = data["reward_state"]
    episode.reward_state = RewardState(
        goal_tolerance=config.tolerance,
        hold_accumulator=rs["hold_accumulator"],
        inside_tolerance=rs["inside_tolerance"],
        path_state=episode.path_state,
    )
    episode.step_count = data["step_count"]
    episode.hold_steps = data["hold_steps"]
    episode.terminated = data["terminated"]
    return episode
