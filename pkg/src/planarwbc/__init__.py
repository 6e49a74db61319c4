"""Whole-body control for a planar mobile manipulator.

A deterministic planar simulator (kinematics, clamping dynamics, capsule
collision, LIDAR), procedural corridor and gap environments, a harmonic
potential field path planner, a shaped tracking reward with goal-hold
accounting, an automatic tolerance curriculum, and a from-scratch PPO
trainer over a discretized acceleration policy.
"""
from .adr import AdrConfig, AdrState, current_tolerance, fresh_state, record_episode
from .config import ConfigError, RunConfig, config_from_dict, config_to_dict, default_config, load_config, save_config
from .envs import (
    EnvSpec,
    Episode,
    EpisodeConfig,
    GenerationError,
    Observation,
    StepOutcome,
    env_step,
    generate_scene,
    make_episode,
    new_episode,
    observation_size,
)
from .evaluate import EvalReport, eval_success_rate, run_controller
from .pathfield import (
    FieldError,
    GridField,
    PathPolyline,
    extract_path,
    field_to_pgm,
    path_metrics,
    rasterize_world,
    solve_harmonic,
)
from .policy import Policy, PolicyConfig, init_params, load_params, save_params
from .ppo import TrainConfig, TrainerState, compute_gae, init_trainer, ppo_update, train_loop
from .render import render_scene, render_snapshot
from .reward import RewardParams, RewardState, compute_step_reward, reset_state, terminal_reward
from .robot import Action, LidarConfig, RobotConfig, RobotState, forward_kinematics, step_dynamics
from .world import WorldGeometry, cast_lidar, collision_check

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AdrConfig",
    "AdrState",
    "ConfigError",
    "EnvSpec",
    "EpisodeConfig",
    "Episode",
    "EvalReport",
    "FieldError",
    "GenerationError",
    "GridField",
    "LidarConfig",
    "Observation",
    "PathPolyline",
    "Policy",
    "PolicyConfig",
    "RewardParams",
    "RewardState",
    "RobotConfig",
    "RobotState",
    "RunConfig",
    "StepOutcome",
    "TrainConfig",
    "TrainerState",
    "WorldGeometry",
    "cast_lidar",
    "collision_check",
    "compute_gae",
    "compute_step_reward",
    "config_from_dict",
    "config_to_dict",
    "current_tolerance",
    "default_config",
    "env_step",
    "eval_success_rate",
    "extract_path",
    "field_to_pgm",
    "forward_kinematics",
    "fresh_state",
    "generate_scene",
    "init_params",
    "init_trainer",
    "load_config",
    "load_params",
    "make_episode",
    "new_episode",
    "observation_size",
    "path_metrics",
    "ppo_update",
    "rasterize_world",
    "record_episode",
    "render_scene",
    "render_snapshot",
    "reset_state",
    "run_controller",
    "save_config",
    "save_params",
    "solve_harmonic",
    "step_dynamics",
    "terminal_reward",
    "train_loop",
    "__version__",
]
