"""Robot description, planar forward kinematics, and dynamics integration.

The robot is an omnidirectional disk base carrying a planar revolute arm.
Base accelerations are commanded in the base frame; the integrator is
semi-implicit Euler (velocities first, then positions) with optional joint
clamping at margin-shrunk limits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import transform_point


@dataclass
class LidarConfig:
    """Per-sensor raycast parameters (same for front and rear)."""

    beams: int = 64
    fov: float = math.pi
    max_range: float = 5.0
    front_offset: tuple[float, float] = (0.0, 0.0)
    rear_offset: tuple[float, float] = (0.0, 0.0)


@dataclass
class RobotConfig:
    """Kinematic and actuation description of the planar robot.

    Joint limits are symmetric-per-joint [min, max] pairs; under the
    clamping variant positions are held inside [min + clamp_margin,
    max - clamp_margin].
    """

    base_radius: float = 0.3
    arm_mount_offset: tuple[float, float] = (0.2, 0.0)
    link_lengths: tuple[float, ...] = (0.3, 0.3, 0.2)
    link_capsule_radius: float = 0.05
    joint_limits: tuple[tuple[float, float], ...] = ((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0))
    clamp_margin: float = 0.05
    max_joint_vel: float = 1.5
    max_base_vel: tuple[float, float, float] = (0.5, 0.5, 1.0)
    max_joint_acc: float = 2.0
    max_base_acc: tuple[float, float, float] = (1.0, 1.0, 2.0)
    lidar: LidarConfig = field(default_factory=LidarConfig)

    @property
    def num_joints(self) -> int:
        return len(self.link_lengths)

    @property
    def max_reach(self) -> float:
        """Largest possible end-effector distance from the base center."""
        return math.hypot(*self.arm_mount_offset) + sum(self.link_lengths)

    def validate(self) -> list[str]:
        """Return a list of invariant violations (empty when valid)."""
        errors = []
        if any(l <= 0.0 for l in self.link_lengths):
            errors.append("robot.link_lengths: all lengths must be > 0")
        if not (self.base_radius > self.link_capsule_radius > 0.0):
            errors.append("robot: require base_radius > link_capsule_radius > 0")
        if len(self.joint_limits) != len(self.link_lengths):
            errors.append("robot.joint_limits: one [min, max] pair per link required")
        for i, (lo, hi) in enumerate(self.joint_limits):
            if not lo < hi:
                errors.append(f"robot.joint_limits[{i}]: min must be < max")
            elif self.clamp_margin >= 0.5 * (hi - lo):
                errors.append(f"robot.clamp_margin: must be < half the span of joint {i}")
        if self.clamp_margin < 0.0:
            errors.append("robot.clamp_margin: must be >= 0")
        if self.lidar.beams < 1:
            errors.append("robot.lidar.beams: at least one beam required")
        if not (0.0 < self.lidar.fov <= 2.0 * math.pi):
            errors.append("robot.lidar.fov: must be in (0, 2*pi]")
        if self.lidar.max_range <= 0.0:
            errors.append("robot.lidar.max_range: must be > 0")
        return errors


@dataclass
class RobotState:
    """Base pose/velocity and arm joint positions/velocities."""

    base_pose: np.ndarray  # (x, y, theta)
    base_vel: np.ndarray  # (vx, vy, omega), base frame
    joint_pos: np.ndarray
    joint_vel: np.ndarray

    @classmethod
    def zeros(cls, config: RobotConfig, base_pose=(0.0, 0.0, 0.0)) -> "RobotState":
        k = config.num_joints
        return cls(
            base_pose=np.asarray(base_pose, dtype=float).copy(),
            base_vel=np.zeros(3),
            joint_pos=np.zeros(k),
            joint_vel=np.zeros(k),
        )

    def copy(self) -> "RobotState":
        return RobotState(
            self.base_pose.copy(),
            self.base_vel.copy(),
            self.joint_pos.copy(),
            self.joint_vel.copy(),
        )


@dataclass
class Action:
    """Commanded accelerations (base frame for the base, per joint for the arm)."""

    base_acc: np.ndarray  # (ax, ay, aw)
    joint_acc: np.ndarray

    @classmethod
    def zeros(cls, config: RobotConfig) -> "Action":
        return cls(np.zeros(3), np.zeros(config.num_joints))


def forward_kinematics(config: RobotConfig, state: RobotState) -> list[np.ndarray]:
    """Compute world frames along the kinematic chain.

    Returns [base, mount, link-1 end, ..., link-K end] where each frame is
    (x, y, phi). The last entry is the end-effector pose with
    phi = theta + sum(joint_pos).
    """
    if state.joint_pos.shape[0] != config.num_joints:
        raise ValueError(
            f"state has {state.joint_pos.shape[0]} joints, config expects {config.num_joints}"
        )
    x, y, theta = state.base_pose
    frames = [np.array([x, y, theta])]
    mount = transform_point(state.base_pose, config.arm_mount_offset)
    phi = theta
    frames.append(np.array([mount[0], mount[1], phi]))
    px, py = mount
    for length, q in zip(config.link_lengths, state.joint_pos):
        phi += q
        px += length * math.cos(phi)
        py += length * math.sin(phi)
        frames.append(np.array([px, py, phi]))
    return frames


def end_effector_pose(config: RobotConfig, state: RobotState) -> np.ndarray:
    return forward_kinematics(config, state)[-1]


def link_segments(config: RobotConfig, state: RobotState) -> np.ndarray:
    """Arm link spines as a (K, 4) array of segments (x0, y0, x1, y1)."""
    frames = forward_kinematics(config, state)
    segs = np.empty((config.num_joints, 4))
    for i in range(config.num_joints):
        segs[i, 0:2] = frames[i + 1][:2]
        segs[i, 2:4] = frames[i + 2][:2]
    return segs


def step_dynamics(
    config: RobotConfig,
    state: RobotState,
    action: Action,
    tau: float,
    clamping_enabled: bool = True,
) -> tuple[RobotState, bool]:
    """Advance the state by one step of semi-implicit Euler.

    Velocities are updated first (and clipped to configured maxima), then
    positions. With clamping enabled, a joint whose new position would leave
    the margin-shrunk limits is pinned to the nearest bound with its velocity
    zeroed, and no limit event is reported. Without clamping, positions
    integrate freely and the second return value flags any raw-limit crossing.
    """
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    if not (
        np.isfinite(state.base_pose).all()
        and np.isfinite(state.base_vel).all()
        and np.isfinite(state.joint_pos).all()
        and np.isfinite(state.joint_vel).all()
        and np.isfinite(action.base_acc).all()
        and np.isfinite(action.joint_acc).all()
    ):
        raise ValueError("non-finite state or action")

    max_bv = np.asarray(config.max_base_vel)
    base_vel = np.clip(state.base_vel + action.base_acc * tau, -max_bv, max_bv)
    joint_vel = np.clip(
        state.joint_vel + action.joint_acc * tau, -config.max_joint_vel, config.max_joint_vel
    )

    # Base translation in the world frame; (vx, vy) are body-frame commands.
    x, y, theta = state.base_pose
    c, s = math.cos(theta), math.sin(theta)
    base_pose = np.array(
        [
            x + (c * base_vel[0] - s * base_vel[1]) * tau,
            y + (s * base_vel[0] + c * base_vel[1]) * tau,
            theta + base_vel[2] * tau,
        ]
    )

    joint_pos = state.joint_pos + joint_vel * tau
    limits = np.asarray(config.joint_limits)
    limit_hit = False
    if clamping_enabled:
        lo = limits[:, 0] + config.clamp_margin
        hi = limits[:, 1] - config.clamp_margin
        below = joint_pos < lo
        above = joint_pos > hi
        joint_pos = np.clip(joint_pos, lo, hi)
        joint_vel = np.where(below | above, 0.0, joint_vel)
    else:
        limit_hit = bool(np.any(joint_pos < limits[:, 0]) or np.any(joint_pos > limits[:, 1]))

    new_state = RobotState(base_pose, base_vel, joint_pos, joint_vel)
    return new_state, limit_hit
