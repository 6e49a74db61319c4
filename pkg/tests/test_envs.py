"""Scene generators, episode state machine, and observation frames.

Generator contracts are checked against independent geometric oracles built
on min_clearance_point (itself validated against brute-force oracles in
test_world.py): a lateral clearance probe for corridor passage width and a
spawn-connected flood fill over base placements for gap unreachability.
"""

import collections
import json
import math

import numpy as np
import pytest

from planarwbc.envs import (
    EnvSpec,
    EpisodeConfig,
    env_step,
    episode_from_dict,
    episode_to_dict,
    generate_scene,
    make_episode,
    new_episode,
    passage_width_along_path,
)
from planarwbc.reward import RewardParams
from planarwbc.robot import (
    Action,
    RobotConfig,
    RobotState,
    end_effector_pose,
    forward_kinematics,
)
from planarwbc.world import WorldGeometry, min_clearance_point

ROBOT = RobotConfig()
PARAMS = RewardParams()


def rect_room(length=6.0, width=4.0):
    walls = np.array(
        [
            [0.0, 0.0, length, 0.0],
            [length, 0.0, length, width],
            [length, width, 0.0, width],
            [0.0, width, 0.0, 0.0],
        ]
    )
    return WorldGeometry(segments=walls, boxes=np.empty((0, 4)), bounds=(0, 0, length, width))


def room_episode(config, goal_offset=(0.15, 0.0), base=(1.5, 2.0, 0.0)):
    """Open-room episode; goal placed relative to the spawn end-effector."""
    world = rect_room()
    start = RobotState.zeros(ROBOT, base_pose=base)
    ee = np.asarray(forward_kinematics(ROBOT, start)[-1][:2])
    goal = (ee[0] + goal_offset[0], ee[1] + goal_offset[1], 0.0)
    return make_episode(ROBOT, PARAMS, config, world, start, goal)


def base_only_action(ax):
    return Action(base_acc=np.array([ax, 0.0, 0.0]), joint_acc=np.zeros(ROBOT.num_joints))


# ---------------------------------------------------------------------------
# Episode state machine
# ---------------------------------------------------------------------------


def test_success_at_exact_hold_count():
    # Spawn already inside tolerance; a static robot must succeed on the
    # step where accumulated hold first reaches hold_time: ceil(1.0/0.04)=25.
    episode = room_episode(EpisodeConfig(tolerance=0.3))
    assert episode.required_hold_steps == 25
    zero = Action.zeros(ROBOT)
    for k in range(1, 25):
        out = env_step(episode, zero)
        assert out.terminated is None
        assert out.info["hold_time"] == pytest.approx(k * 0.04, abs=1e-12)
    out = env_step(episode, zero)
    assert out.terminated == "success"
    assert out.info["hold_time"] == pytest.approx(1.0, abs=1e-12)
    # Success bonus is folded into the final step's reward.
    assert out.reward - out.info["reward_terms"]["total"] == pytest.approx(10.0, abs=1e-12)
    with pytest.raises(RuntimeError):
        env_step(episode, zero)


def test_hold_restart_after_exit():
    # Leave the tolerance disk for one step: the hold timer must restart
    # from zero and the accumulated hold reward must be refunded exactly.
    episode = room_episode(EpisodeConfig(tolerance=0.05), goal_offset=(0.049, 0.0))
    zero = Action.zeros(ROBOT)
    paid = 0.0
    for _ in range(10):
        out = env_step(episode, zero)
        paid += out.info["reward_terms"]["hold"]
    assert out.info["hold_time"] == pytest.approx(0.4, abs=1e-12)

    # One backward kick: v=-0.04 m/s for one step moves d from 0.049 to
    # 0.0506 (semi-implicit Euler), crossing the 0.05 boundary.
    out = env_step(episode, base_only_action(-1.0))
    assert out.info["goal_distance"] > 0.05
    assert out.info["hold_time"] == 0.0
    assert out.info["reward_terms"]["hold_refund"] == pytest.approx(-paid, abs=1e-12)

    # Braking step ends with v=0, still outside: no hold, no second refund.
    out = env_step(episode, base_only_action(1.0))
    assert out.info["goal_distance"] > 0.05
    assert out.info["hold_time"] == 0.0
    assert out.info["reward_terms"]["hold_refund"] == 0.0

    # Re-enter: the timer restarts from scratch, so success needs a further
    # full 25 in-tolerance steps, not 25 minus the pre-exit credit.
    out = env_step(episode, base_only_action(1.0))
    assert out.info["goal_distance"] <= 0.05
    assert out.info["hold_time"] == pytest.approx(0.04, abs=1e-12)
    out = env_step(episode, base_only_action(-1.0))  # stop inside
    assert out.info["hold_time"] == pytest.approx(0.08, abs=1e-12)
    for k in range(22):
        out = env_step(episode, zero)
        assert out.terminated is None
    out = env_step(episode, zero)
    assert out.terminated == "success"
    assert out.info["hold_time"] == pytest.approx(1.0, abs=1e-12)


def test_timeout_at_step_limit():
    config = EpisodeConfig(tolerance=0.05, time_limit=2.0)
    episode = room_episode(config, goal_offset=(2.0, 0.0))
    assert episode.max_steps == 50
    zero = Action.zeros(ROBOT)
    for _ in range(49):
        out = env_step(episode, zero)
        assert out.terminated is None
    out = env_step(episode, zero)
    assert out.terminated == "timeout"
    assert out.info["hold_time"] == 0.0
    # Timeout carries no terminal bonus or penalty.
    assert out.reward == out.info["reward_terms"]["total"]


def test_joint_limit_terminates_baseline_only():
    # Driving the wrist keeps the arm clear of the base disk, so the first
    # termination under the baseline variant is the limit crossing itself.
    wrist = Action(base_acc=np.zeros(3), joint_acc=np.array([0.0, 0.0, 2.0]))
    episode = room_episode(
        EpisodeConfig(tolerance=0.05, variant="baseline"), goal_offset=(2.0, 0.0)
    )
    out = None
    for _ in range(70):
        out = env_step(episode, wrist)
        if out.terminated is not None:
            break
    assert out.terminated == "joint_limit"
    assert episode.state.joint_pos[2] > ROBOT.joint_limits[2][1]
    assert out.reward - out.info["reward_terms"]["total"] == pytest.approx(-20.0, abs=1e-12)

    # Same action stream under clamping: the joint pins at limit-margin with
    # zero velocity and the episode keeps running.
    episode = room_episode(EpisodeConfig(tolerance=0.05), goal_offset=(2.0, 0.0))
    for _ in range(80):
        out = env_step(episode, wrist)
        assert out.terminated is None
    assert episode.state.joint_pos[2] == pytest.approx(
        ROBOT.joint_limits[2][1] - ROBOT.clamp_margin, abs=1e-12
    )
    assert episode.state.joint_vel[2] == 0.0


def test_config_validation_rejected_in_make_episode():
    world = rect_room()
    start = RobotState.zeros(ROBOT, base_pose=(1.5, 2.0, 0.0))
    with pytest.raises(ValueError, match="tolerance"):
        make_episode(ROBOT, PARAMS, EpisodeConfig(tolerance=0.6), world, start, (2.6, 2.0, 0.0))
    with pytest.raises(ValueError, match="grid_cell"):
        make_episode(
            ROBOT, PARAMS, EpisodeConfig(grid_cell=0.5), world, start, (2.6, 2.0, 0.0)
        )
    assert EpisodeConfig().validate() == []


# ---------------------------------------------------------------------------
# Observation frames
# ---------------------------------------------------------------------------


def rot(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def test_goal_in_ee_frame():
    world = rect_room()
    start = RobotState.zeros(ROBOT, base_pose=(1.5, 2.0, 0.0))
    ee_x, ee_y, ee_phi = end_effector_pose(ROBOT, start)

    # Goal coincident with the end-effector pose reads as the origin.
    episode = make_episode(
        ROBOT, PARAMS, EpisodeConfig(), world, start, (ee_x + 0.2, ee_y, ee_phi)
    )
    episode.goal_pose = np.array([ee_x, ee_y, ee_phi])
    obs = episode.observation()
    assert np.allclose(obs.goal_in_ee, 0.0, atol=1e-12)

    # Goal one meter straight ahead of the gripper reads as (1, 0, 0).
    episode.goal_pose = np.array([ee_x + 1.0, ee_y, ee_phi])
    obs = episode.observation()
    assert np.allclose(obs.goal_in_ee, (1.0, 0.0, 0.0), atol=1e-12)


def test_goal_in_ee_round_trip():
    # Mapping the frame-relative reading back through the EE pose must
    # recover the world-frame goal for arbitrary states.
    rng = np.random.default_rng(11)
    world = rect_room(8.0, 8.0)
    episode = make_episode(
        ROBOT, PARAMS, EpisodeConfig(), world, RobotState.zeros(ROBOT, (4, 4, 0)),
        (4.5, 4.0, 0.0),
    )
    for _ in range(25):
        state = RobotState(
            base_pose=np.array([rng.uniform(2, 6), rng.uniform(2, 6), rng.uniform(-3, 3)]),
            base_vel=rng.uniform(-0.5, 0.5, 3),
            joint_pos=rng.uniform(-1.5, 1.5, 3),
            joint_vel=rng.uniform(-1, 1, 3),
        )
        goal = np.array([rng.uniform(1, 7), rng.uniform(1, 7), rng.uniform(-3, 3)])
        episode.state = state
        episode.goal_pose = goal
        rel = episode.observation().goal_in_ee
        ee_x, ee_y, ee_phi = end_effector_pose(ROBOT, state)
        recovered = np.array([ee_x, ee_y]) + rot(ee_phi) @ rel[:2]
        assert np.allclose(recovered, goal[:2], atol=1e-12)
        assert math.cos(rel[2] + ee_phi - goal[2]) == pytest.approx(1.0, abs=1e-12)


def test_observation_vector_layout():
    episode = room_episode(EpisodeConfig())
    obs = episode.observation()
    vec = obs.to_vector()
    beams = ROBOT.lidar.beams
    assert vec.shape == (2 * beams + 2 * ROBOT.num_joints + 6,)
    assert np.all(np.isfinite(vec))
    assert np.array_equal(vec[:beams], obs.front_scan)
    assert np.array_equal(vec[beams : 2 * beams], obs.rear_scan)
    assert np.array_equal(vec[-3:], obs.goal_in_ee)
    assert np.all((obs.front_scan >= 0) & (obs.front_scan <= 1))
    assert np.all((obs.rear_scan >= 0) & (obs.rear_scan <= 1))


# ---------------------------------------------------------------------------
# Corridor generator
# ---------------------------------------------------------------------------


def oracle_clearances(world, pts):
    """Distance from each point to the nearest obstacle (0 inside a box);
    independent vectorized reimplementation of the clearance query."""
    pts = np.asarray(pts, float)
    d = np.full(len(pts), np.inf)
    for x1, y1, x2, y2 in world.segments:
        a = np.array([x1, y1])
        ab = np.array([x2 - x1, y2 - y1])
        denom = float(ab @ ab) or 1.0
        t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
        delta = pts - a - t[:, None] * ab
        d = np.minimum(d, np.hypot(delta[:, 0], delta[:, 1]))
    for x0, y0, x1, y1 in world.boxes:
        dx = np.maximum(np.maximum(x0 - pts[:, 0], pts[:, 0] - x1), 0.0)
        dy = np.maximum(np.maximum(y0 - pts[:, 1], pts[:, 1] - y1), 0.0)
        d = np.minimum(d, np.hypot(dx, dy))
    return d


def oracle_passage_width(world, points, span=1.5, step=0.02):
    """Independent cross-section probe: twice the best clearance found on
    the lateral line through each path vertex (world interior only)."""
    diffs = points[1:] - points[:-1]
    lens = np.hypot(diffs[:, 0], diffs[:, 1])
    keep = lens > 0
    dirs = diffs[keep] / lens[keep, None]
    stations = points[:-1][keep]
    normals = np.stack([-dirs[:, 1], dirs[:, 0]], axis=1)
    offsets = np.arange(-span, span + step / 2, step)
    probes = (stations[:, None, :] + offsets[None, :, None] * normals[:, None, :]).reshape(-1, 2)
    clear = oracle_clearances(world, probes)
    xmin, ymin, xmax, ymax = world.bounds
    outside = (
        (probes[:, 0] < xmin) | (probes[:, 0] > xmax)
        | (probes[:, 1] < ymin) | (probes[:, 1] > ymax)
    )
    clear[outside] = 0.0
    return 2.0 * clear.reshape(len(stations), -1).max(axis=1).min()


def test_corridor_scene_contract():
    spec = EnvSpec(kind="corridor")
    for seed in range(8):
        rng = np.random.default_rng(seed)
        world, start, goal = generate_scene(spec, ROBOT, rng)
        xmin, ymin, length, width = world.bounds
        assert (xmin, ymin) == (0.0, 0.0)
        assert 6.0 <= length <= 12.0 and 1.5 <= width <= 2.5
        assert np.allclose(start.base_pose, (0.7, width / 2.0, 0.0))
        assert len(world.boxes) <= 4
        for x0, y0, x1, y1 in world.boxes:
            assert y0 == 0.0 or y1 == width  # obstacles grow from a wall
            assert 0.0 < x0 < x1 < length
        # Goal sits in the far third with clearance for the tolerance disk.
        assert 2.0 * length / 3.0 - 1e-9 <= goal[0] <= length - 0.5 + 1e-9
        assert min_clearance_point(world, goal[:2]) >= spec.corridor_min_passage / 2.0

        episode = make_episode(ROBOT, PARAMS, EpisodeConfig(), world, start, goal)
        ee = np.asarray(forward_kinematics(ROBOT, start)[-1][:2])
        assert np.allclose(episode.path.points[0], ee, atol=1e-9)
        assert np.allclose(episode.path.points[-1], goal[:2], atol=1e-9)
        # Every scene threads a passage at least min_passage wide along the
        # planned path (small slack for the probe's lateral discretization).
        passage = oracle_passage_width(world, episode.path.points)
        assert passage >= spec.corridor_min_passage - 0.03
        assert passage_width_along_path(world, episode.path) >= spec.corridor_min_passage - 0.05


def test_passage_width_matches_analytic_chute():
    # One box leaves a chute of exactly 2.0 - 1.2 = 0.8 between its top face
    # and the corridor wall; every cross-section elsewhere is wider, so both
    # the production probe and the independent oracle must read 0.8.
    world = rect_room(8.0, 2.0)
    world.boxes = np.array([[3.5, 0.0, 4.5, 1.2]])
    start = RobotState.zeros(ROBOT, base_pose=(0.7, 1.0, 0.0))
    episode = make_episode(ROBOT, PARAMS, EpisodeConfig(), world, start, (7.0, 1.0, 0.0))
    assert passage_width_along_path(world, episode.path) == pytest.approx(0.8, abs=0.06)
    assert oracle_passage_width(world, episode.path.points) == pytest.approx(0.8, abs=0.06)


def test_empty_corridor_midline_path_is_straight():
    # With no obstacles and start/goal both on the corridor axis, the
    # potential field is symmetric and the streamline must stay on the axis
    # to within one grid cell.
    world = rect_room(8.0, 2.0)
    start = RobotState.zeros(ROBOT, base_pose=(0.7, 1.0, 0.0))
    config = EpisodeConfig()
    episode = make_episode(ROBOT, PARAMS, config, world, start, (7.0, 1.0, 0.0))
    assert np.abs(episode.path.points[:, 1] - 1.0).max() <= config.grid_cell


def test_scene_generation_is_seed_deterministic():
    for spec in (EnvSpec(kind="corridor"), EnvSpec.gap_test()):
        w1, s1, g1 = generate_scene(spec, ROBOT, np.random.default_rng(42))
        w2, s2, g2 = generate_scene(spec, ROBOT, np.random.default_rng(42))
        assert np.array_equal(w1.segments, w2.segments)
        assert np.array_equal(w1.boxes, w2.boxes)
        assert w1.bounds == w2.bounds
        assert np.array_equal(s1.base_pose, s2.base_pose)
        assert np.array_equal(s1.joint_pos, s2.joint_pos)
        assert np.array_equal(g1, g2)
        _, _, g3 = generate_scene(spec, ROBOT, np.random.default_rng(43))
        assert not np.array_equal(g1, g3)


def test_rollout_is_deterministic():
    spec = EnvSpec(kind="corridor")
    rewards = []
    finals = []
    for _ in range(2):
        episode = new_episode(spec, ROBOT, PARAMS, EpisodeConfig(), np.random.default_rng(7))
        act_rng = np.random.default_rng(99)
        rs = []
        for _ in range(40):
            action = Action(
                base_acc=act_rng.uniform(-1, 1, 3), joint_acc=act_rng.uniform(-2, 2, 3)
            )
            out = env_step(episode, action)
            rs.append(out.reward)
            if out.terminated is not None:
                break
        rewards.append(rs)
        finals.append(episode.state)
    assert rewards[0] == rewards[1]  # bitwise, not approximate
    assert np.array_equal(finals[0].base_pose, finals[1].base_pose)
    assert np.array_equal(finals[0].joint_pos, finals[1].joint_pos)


# ---------------------------------------------------------------------------
# Gap generator
# ---------------------------------------------------------------------------


def slot_geometry(world):
    """(x0, x1, gap_lo, gap_hi) of the tunnel slot between the two wall boxes."""
    low = world.boxes[np.argmin(world.boxes[:, 1])]
    high = world.boxes[np.argmax(world.boxes[:, 3])]
    return low[0], low[2], low[3], high[1]


def test_gap_train_is_canonical_without_noise():
    spec = EnvSpec.gap_train()
    spec = type(spec)(**{**spec.__dict__, "gap_goal_lateral_noise": 0.0,
                         "gap_goal_angle_noise": 0.0, "gap_joint_noise": 0.0})
    w1, s1, g1 = generate_scene(spec, ROBOT, np.random.default_rng(1))
    w2, s2, g2 = generate_scene(spec, ROBOT, np.random.default_rng(2))
    # All randomness removed: every draw yields the same scene.
    assert np.array_equal(w1.boxes, w2.boxes)
    assert np.array_equal(s1.joint_pos, s2.joint_pos)
    assert np.array_equal(g1, g2)
    x0, x1, gap_lo, gap_hi = slot_geometry(w1)
    assert gap_hi - gap_lo == pytest.approx(0.3, abs=1e-12)
    assert x1 - x0 == pytest.approx(0.5, abs=1e-12)
    assert g1[0] - x0 == pytest.approx(0.4, abs=1e-12)  # fixed goal depth
    assert g1[1] == pytest.approx((gap_lo + gap_hi) / 2.0, abs=1e-12)
    assert g1[2] == 0.0


def reachable_goal_distance(world, spawn_xy, goal_xy, radius, cell=0.05):
    """Min |base - goal| over base placements whose disk fits, restricted to
    the flood-fill component connected to the spawn."""
    xmin, ymin, xmax, ymax = world.bounds
    xs = np.arange(xmin, xmax + 1e-9, cell)
    ys = np.arange(ymin, ymax + 1e-9, cell)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    free = (oracle_clearances(world, pts) > radius).reshape(len(xs), len(ys))
    si = int(round((spawn_xy[0] - xmin) / cell))
    sj = int(round((spawn_xy[1] - ymin) / cell))
    assert free[si, sj], "spawn base placement must be collision-free"
    seen = np.zeros_like(free)
    seen[si, sj] = True
    queue = collections.deque([(si, sj)])
    best = math.inf
    max_x = -math.inf
    while queue:
        i, j = queue.popleft()
        best = min(best, float(np.hypot(xs[i] - goal_xy[0], ys[j] - goal_xy[1])))
        max_x = max(max_x, xs[i])
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < len(xs) and 0 <= b < len(ys) and free[a, b] and not seen[a, b]:
                seen[a, b] = True
                queue.append((a, b))
    return best, max_x


@pytest.mark.parametrize("spec_name,seeds", [("gap_train", (0, 1)), ("gap_test", range(6))])
def test_gap_goal_unreachable_by_base_alone(spec_name, seeds):
    spec = getattr(EnvSpec, spec_name)()
    for seed in seeds:
        rng = np.random.default_rng(seed)
        world, start, goal = generate_scene(spec, ROBOT, rng)
        x0, x1, gap_lo, gap_hi = slot_geometry(world)
        gap = gap_hi - gap_lo
        # The arm must fit through the slot; the base must not.
        assert gap > 2.0 * ROBOT.link_capsule_radius + 0.05
        assert gap < 2.0 * ROBOT.base_radius
        # With the arm frozen in its folded spawn pose, the end-effector
        # stays on a circle of the folded radius around the base center, so
        # the goal is out of holding range from every base placement that
        # the spawn component can reach.
        ee = np.asarray(forward_kinematics(ROBOT, start)[-1][:2])
        folded = float(np.hypot(ee[0] - start.base_pose[0], ee[1] - start.base_pose[1]))
        best, max_x = reachable_goal_distance(
            world, start.base_pose[:2], goal[:2], ROBOT.base_radius
        )
        assert best > folded + 0.05
        # The slot blocks the base: no reachable placement beyond the wall.
        assert max_x < x1


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_episode_snapshot_round_trip():
    episode = new_episode(
        EnvSpec(kind="corridor"), ROBOT, PARAMS, EpisodeConfig(), np.random.default_rng(5)
    )
    act_rng = np.random.default_rng(17)
    actions = [
        Action(base_acc=act_rng.uniform(-1, 1, 3), joint_acc=act_rng.uniform(-2, 2, 3))
        for _ in range(12)
    ]
    for action in actions[:7]:
        env_step(episode, action)

    restored = episode_from_dict(
        ROBOT, PARAMS, json.loads(json.dumps(episode_to_dict(episode)))
    )
    assert np.array_equal(restored.path.points, episode.path.points)
    assert restored.step_count == episode.step_count
    assert restored.hold_steps == episode.hold_steps
    assert restored.reward_state.hold_accumulator == episode.reward_state.hold_accumulator
    assert np.array_equal(
        restored.observation().to_vector(), episode.observation().to_vector()
    )
    # The restored episode continues bit-identically.
    for action in actions[7:]:
        a = env_step(episode, action)
        b = env_step(restored, action)
        assert b.reward == a.reward
        assert b.terminated == a.terminated
        assert b.info["goal_distance"] == a.info["goal_distance"]
        assert b.info["path_deviation"] == a.info["path_deviation"]
        if a.terminated is not None:
            break
