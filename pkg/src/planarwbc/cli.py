"""Command-line entry points: train, eval, inspect-env, hpf-dump, render.

Every subcommand takes --config (JSON, defaults applied for absent fields),
--seed, and --out; the default output directory comes from the PLANARWBC_OUT
environment variable when set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, default_config, load_config, save_config
from .envs import generate_scene, make_episode, new_episode
from .evaluate import eval_success_rate
from .pathfield import extract_path, field_to_pgm, rasterize_world, solve_harmonic
from .ppo import train_loop
from .render import render_scene
from .robot import forward_kinematics


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="JSON run configuration (defaults when omitted)")
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--out", type=Path,
                     default=Path(os.environ.get("PLANARWBC_OUT", "out")),
                     help="output directory (default: $PLANARWBC_OUT or ./out)")


def _load_run(args):
    if args.config is not None:
        return load_config(args.config)
    return default_config()


def _cmd_train(args) -> int:
    run = _load_run(args)
    run = replace(run, train=replace(run.train, seed=args.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    save_config(run, args.out / "config.json")
    summary = train_loop(run, args.out, resume=args.resume)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    run = _load_run(args)
    args.out.mkdir(parents=True, exist_ok=True)
    report = eval_success_rate(
        run,
        args.checkpoint,
        episodes=args.episodes,
        seed=args.seed,
        tolerance=args.tolerance,
        sample=args.sample,
        trace_path=(args.out / "trace.jsonl") if args.trace else None,
    )
    (args.out / "report.json").write_text(report.to_json())
    print(report.format_table())
    return 0


def _cmd_inspect_env(args) -> int:
    run = _load_run(args)
    seeds = np.random.SeedSequence(args.seed).spawn(args.count)
    for i in range(args.count):
        rng = np.random.default_rng(seeds[i])
        episode = new_episode(run.env, run.robot, run.reward, run.episode, rng)
        goal = episode.goal_pose
        print(
            f"scene {i}: kind={run.env.kind} boxes={len(episode.world.boxes)} "
            f"bounds={tuple(round(b, 2) for b in episode.world.bounds)} "
            f"goal=({goal[0]:.3f}, {goal[1]:.3f}, {goal[2]:.3f}) "
            f"path_length={episode.path.total_length:.3f}"
        )
    return 0


def _cmd_hpf_dump(args) -> int:
    run = _load_run(args)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    world, start, goal_pose = generate_scene(run.env, run.robot, rng)
    raster = rasterize_world(world, args.cell_size,
                             inflate=run.robot.link_capsule_radius,
                             goal=goal_pose[:2])
    solve_harmonic(raster)
    ee_xy = forward_kinematics(run.robot, start)[-1][:2]
    path = extract_path(raster, ee_xy, goal=goal_pose[:2])
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "field.pgm").write_bytes(field_to_pgm(raster))
    (args.out / "path.json").write_text(
        json.dumps({"points": path.points.tolist(),
                    "total_length": path.total_length}, indent=2) + "\n"
    )
    print(f"wrote {args.out / 'field.pgm'} and {args.out / 'path.json'} "
          f"(path length {path.total_length:.3f} m)")
    return 0


def _read_trace(path, episode_index: int):
    records = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["episode"] == episode_index:
                records.append(rec)
    return records


def _cmd_render(args) -> int:
    run = _load_run(args)
    if args.trace is not None:
        # Match the per-episode seed derivation of `eval` so the regenerated
        # scene is the one the traced episode ran in.
        seq = np.random.SeedSequence(args.seed).spawn(args.episode + 1)[args.episode]
    else:
        seq = np.random.SeedSequence(args.seed)
    rng = np.random.default_rng(seq)
    episode = new_episode(run.env, run.robot, run.reward, run.episode, rng)
    state = episode.state
    ee_trace = None
    if args.trace is not None:
        records = _read_trace(args.trace, args.episode)
        if not records:
            print(f"no records for episode {args.episode} in {args.trace}",
                  file=sys.stderr)
            return 1
        trace = []
        for rec in records:
            st = state.copy()
            st.base_pose = np.asarray(rec["base_pose"], dtype=float)
            st.joint_pos = np.asarray(rec["joint_pos"], dtype=float)
            trace.append(forward_kinematics(run.robot, st)[-1][:2])
            last = st
        ee_trace = np.asarray(trace)
        state = last
    svg = render_scene(
        run.robot, episode.world, state, episode.goal_pose,
        episode.config.tolerance, ee_trace=ee_trace, show_lidar=args.lidar,
        path_points=episode.path.points,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    target = args.out / "scene.svg"
    target.write_text(svg)
    print(f"wrote {target}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planarwbc",
        description="Whole-body control for a planar mobile manipulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run PPO training")
    _add_common(p)
    p.add_argument("--resume", type=Path, default=None,
                   help="training checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=None,
                   help="fixed goal tolerance (default: episode config value)")
    p.add_argument("--sample", action="store_true",
                   help="sample actions instead of greedy argmax")
    p.add_argument("--trace", action="store_true",
                   help="write per-step JSONL traces to <out>/trace.jsonl")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect-env", help="generate and summarize scenes")
    _add_common(p)
    p.add_argument("--count", type=int, default=5)
    p.set_defaults(func=_cmd_inspect_env)

    p = sub.add_parser("hpf-dump", help="dump a potential field PGM and path JSON")
    _add_common(p)
    p.add_argument("--cell-size", type=float, default=0.05)
    p.set_defaults(func=_cmd_hpf_dump)

    p = sub.add_parser("render", help="render a scene (optionally with a trace) to SVG")
    _add_common(p)
    p.add_argument("--lidar", action="store_true", help="draw LIDAR rays")
    p.add_argument("--trace", type=Path, default=None,
                   help="JSONL trace from `eval --trace` to overlay")
    p.add_argument("--episode", type=int, default=0,
                   help="episode index within the trace file")
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
