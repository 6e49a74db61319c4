"""World geometry, capsule collision checks, and raycast LIDAR."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    point_box_distance,
    point_segment_distance,
    rays_boxes_hits,
    rays_segments_hits,
    segment_box_distance,
    segment_segment_distance,
    transform_point,
)
from .robot import RobotConfig, RobotState, link_segments


@dataclass
class WorldGeometry:
    """Static obstacles: wall segments plus axis-aligned boxes.

    bounds is the (xmin, ymin, xmax, ymax) rectangle enclosing everything;
    it is used for rasterization and rendering, not sensed directly.
    """

    segments: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    boxes: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 4)


@dataclass
class LidarScan:
    """Raw beam ranges in meters, capped at the sensor max range."""

    ranges: np.ndarray


def min_clearance_point(world: WorldGeometry, p) -> float:
    """Distance from a point to the nearest wall segment or box."""
    d = math.inf
    for seg in world.segments:
        d = min(d, point_segment_distance(p, seg))
    for box in world.boxes:
        d = min(d, point_box_distance(p, box))
    return d


def min_clearance_segment(world: WorldGeometry, seg) -> float:
    """Distance from a segment to the nearest wall segment or box."""
    d = math.inf
    for wseg in world.segments:
        d = min(d, segment_segment_distance(seg, wseg))
    for box in world.boxes:
        d = min(d, segment_box_distance(seg, box))
    return d


def body_obstacle_clearance(
    config: RobotConfig, state: RobotState, world: WorldGeometry
) -> float:
    """Minimum surface-to-obstacle distance over base disk and arm capsules.

    Negative values indicate penetration depth.
    """
    base_c = state.base_pose[:2]
    d = min_clearance_point(world, base_c) - config.base_radius
    for seg in link_segments(config, state):
        d = min(d, min_clearance_segment(world, seg) - config.link_capsule_radius)
    return d


def collision_check(config: RobotConfig, state: RobotState, world: WorldGeometry) -> bool:
    """True iff the robot intersects the world or itself.

    Checks (a) base disk vs walls/boxes, (b) every link capsule vs
    walls/boxes, (c) self-collision: link capsules from the second link
    outward vs the base disk, and pairs of non-adjacent link capsules.
    """
    base_c = state.base_pose[:2]
    if min_clearance_point(world, base_c) <= config.base_radius:
        return True
    links = link_segments(config, state)
    r = config.link_capsule_radius
    for seg in links:
        if min_clearance_segment(world, seg) <= r:
            return True
    # The first link starts at the mount inside the base disk, so only the
    # second link onward (index >= 2 counting from the base) is checked
    # against the base.
    for i in range(1, len(links)):
        if point_segment_distance(base_c, links[i]) <= config.base_radius + r:
            return True
    for i in range(len(links)):
        for j in range(i + 2, len(links)):
            if segment_segment_distance(links[i], links[j]) <= 2.0 * r:
                return True
    return False


def beam_angles(config: RobotConfig, heading: float, sensor: str) -> np.ndarray:
    """World-frame beam directions for one sensor, centered on its facing."""
    lidar = config.lidar
    center = heading if sensor == "front" else heading + math.pi
    if lidar.beams == 1:
        return np.array([center])
    return center + np.linspace(-lidar.fov / 2.0, lidar.fov / 2.0, lidar.beams)


def cast_lidar(
    config: RobotConfig, state: RobotState, world: WorldGeometry, sensor: str
) -> LidarScan:
    """Raycast one sensor against the world (the robot does not sense itself)."""
    if sensor not in ("front", "rear"):
        raise ValueError(f"unknown sensor {sensor!r}")
    lidar = config.lidar
    offset = lidar.front_offset if sensor == "front" else lidar.rear_offset
    origin = transform_point(state.base_pose, offset)
    angles = beam_angles(config, state.base_pose[2], sensor)
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    t = np.full(lidar.beams, np.inf)
    hits = rays_segments_hits(origin, directions, world.segments)
    if hits.size:
        t = np.minimum(t, hits.min(axis=1))
    hits = rays_boxes_hits(origin, directions, world.boxes)
    if hits.size:
        t = np.minimum(t, hits.min(axis=1))
    return LidarScan(ranges=np.minimum(t, lidar.max_range))
