"""Actor-critic network: scan encoders, shared trunk, discrete action heads.

Front and rear range scans pass through two independent two-layer encoders;
their embeddings are concatenated with the proprioceptive/goal inputs and fed
to a tanh trunk. One categorical head per action dimension produces bin
logits (an odd bin count keeps zero acceleration representable) and a scalar
head estimates the value. All parameters live in one flat float64 array with
a documented (name, shape, offset) layout, which makes checkpoints, optimizer
state, and gradient checks straightforward.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .robot import Action, RobotConfig

CHECKPOINT_MAGIC = b"PWBCNET1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PolicyConfig:
    """Network sizes plus the fixed input scaling vector.

    obs_scale multiplies the raw observation before the first layer so all
    inputs land in roughly [-1, 1]; it is part of the architecture (and the
    checkpoint hash), not of the environment.
    """

    scan_beams: int = 64
    scan_hidden: tuple[int, int] = (128, 64)
    proprio_size: int = 12
    trunk_hidden: tuple[int, int] = (256, 256)
    action_dims: int = 6
    bins: int = 7
    obs_scale: tuple[float, ...] = ()

    @classmethod
    def for_robot(cls, robot: RobotConfig, **overrides) -> "PolicyConfig":
        """Sizes and input scaling derived from the robot description."""
        k = robot.num_joints
        scale = []
        scale += [1.0] * (2 * robot.lidar.beams)
        scale += [1.0 / max(abs(lo), abs(hi), 1e-9) for lo, hi in robot.joint_limits]
        scale += [1.0 / robot.max_joint_vel] * k
        scale += [1.0 / v for v in robot.max_base_vel]
        scale += [1.0 / robot.lidar.max_range] * 2 + [1.0 / np.pi]
        defaults = dict(
            scan_beams=robot.lidar.beams,
            proprio_size=2 * k + 3 + 3,
            action_dims=3 + k,
            obs_scale=tuple(scale),
        )
        defaults.update(overrides)
        return cls(**defaults)

    @property
    def observation_size(self) -> int:
        return 2 * self.scan_beams + self.proprio_size

    def validate(self) -> list[str]:
        errors = []
        if self.scan_beams < 1 or self.proprio_size < 1:
            errors.append("scan_beams and proprio_size must be >= 1")
        if self.bins < 2 or self.bins % 2 == 0:
            errors.append("bins must be odd and >= 3 so zero acceleration is a bin center")
        if self.action_dims < 1:
            errors.append("action_dims must be >= 1")
        if self.obs_scale and len(self.obs_scale) != self.observation_size:
            errors.append("obs_scale length must equal the observation size")
        return errors


@dataclass
class PolicyOutput:
    """Per-dimension bin logits and the value estimate for one observation."""

    logits: np.ndarray  # (action_dims, bins)
    value: float


def layout(config: PolicyConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, offset) table of the flat parameter array."""
    h1, h2 = config.scan_hidden
    t1, t2 = config.trunk_hidden
    trunk_in = 2 * h2 + config.proprio_size
    entries: list[tuple[str, tuple[int, ...]]] = []
    for side in ("front", "rear"):
        entries += [
            (f"scan_{side}.w0", (config.scan_beams, h1)),
            (f"scan_{side}.b0", (h1,)),
            (f"scan_{side}.w1", (h1, h2)),
            (f"scan_{side}.b1", (h2,)),
        ]
    entries += [
        ("trunk.w0", (trunk_in, t1)),
        ("trunk.b0", (t1,)),
        ("trunk.w1", (t1, t2)),
        ("trunk.b1", (t2,)),
    ]
    for d in range(config.action_dims):
        entries += [(f"head{d}.w", (t2, config.bins)), (f"head{d}.b", (config.bins,))]
    entries += [("value.w", (t2, 1)), ("value.b", (1,))]
    table = []
    offset = 0
    for name, shape in entries:
        table.append((name, shape, offset))
        offset += int(np.prod(shape))
    return table


def param_count(config: PolicyConfig) -> int:
    name, shape, offset = layout(config)[-1]
    return offset + int(np.prod(shape))


def param_views(config: PolicyConfig, params: np.ndarray) -> dict[str, np.ndarray]:
    """Named reshaped views into the flat array (no copies)."""
    if params.shape != (param_count(config),):
        raise ValueError(
            f"params must have shape ({param_count(config)},), got {params.shape}"
        )
    views = {}
    for name, shape, offset in layout(config):
        size = int(np.prod(shape))
        views[name] = params[offset : offset + size].reshape(shape)
    return views


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    rows, cols = max(shape), min(shape)
    a = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
    if q.shape != shape:
        q = q.T
    return gain * q


def init_params(config: PolicyConfig, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal hidden weights, small-gain heads, zero biases."""
    params = np.zeros(param_count(config))
    views = param_views(config, params)
    for name, view in views.items():
        if not name.endswith(".w0") and not name.endswith(".w1") and not name.endswith(".w"):
            continue
        gain = 0.01 if name.startswith(("head", "value")) else 1.0
        view[...] = _orthogonal(rng, view.shape, gain)
    return params


def _scaled(config: PolicyConfig, obs: np.ndarray) -> np.ndarray:
    if config.obs_scale:
        return obs * np.asarray(config.obs_scale)
    return obs


class Policy:
    """Flat parameter array bound to a config, with fast and taped forwards."""

    def __init__(self, config: PolicyConfig, params: np.ndarray):
        issues = config.validate()
        if issues:
            raise ValueError("; ".join(issues))
        self.config = config
        self.params = np.ascontiguousarray(params, dtype=np.float64)
        self.views = param_views(config, self.params)

    # -- fast numpy forward --------------------------------------------------

    def forward_batch(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(N, obs) -> logits (N, dims, bins) and values (N,)."""
        cfg = self.config
        if obs.ndim != 2 or obs.shape[1] != cfg.observation_size:
            raise ValueError(
                f"expected observations of shape (N, {cfg.observation_size}), got {obs.shape}"
            )
        v = self.views
        x = _scaled(cfg, obs)
        nb = cfg.scan_beams
        front, rear, prop = x[:, :nb], x[:, nb : 2 * nb], x[:, 2 * nb :]
        ef = np.tanh(
            np.tanh(front @ v["scan_front.w0"] + v["scan_front.b0"]) @ v["scan_front.w1"]
            + v["scan_front.b1"]
        )
        er = np.tanh(
            np.tanh(rear @ v["scan_rear.w0"] + v["scan_rear.b0"]) @ v["scan_rear.w1"]
            + v["scan_rear.b1"]
        )
        h = np.tanh(np.concatenate([ef, er, prop], axis=1) @ v["trunk.w0"] + v["trunk.b0"])
        h = np.tanh(h @ v["trunk.w1"] + v["trunk.b1"])
        logits = np.stack(
            [h @ v[f"head{d}.w"] + v[f"head{d}.b"] for d in range(cfg.action_dims)], axis=1
        )
        values = (h @ v["value.w"] + v["value.b"])[:, 0]
        return logits, values

    def forward(self, obs: np.ndarray) -> PolicyOutput:
        logits, values = self.forward_batch(obs.reshape(1, -1))
        return PolicyOutput(logits=logits[0], value=float(values[0]))

    # -- taped forward for training ------------------------------------------

    def graph_forward(self, obs: np.ndarray):
        """Taped batch forward.

        Returns (logits tensors per action dimension, value tensor (N,),
        parameter tensors by layout name) for loss assembly and backward().
        """
        cfg = self.config
        v = {name: ad.Tensor(view) for name, view in self.views.items()}
        x = _scaled(cfg, obs)
        nb = cfg.scan_beams
        front = ad.Tensor(x[:, :nb])
        rear = ad.Tensor(x[:, nb : 2 * nb])
        prop = ad.Tensor(x[:, 2 * nb :])
        ef = ad.tanh(
            ad.matmul(ad.tanh(ad.matmul(front, v["scan_front.w0"]) + v["scan_front.b0"]),
                      v["scan_front.w1"]) + v["scan_front.b1"]
        )
        er = ad.tanh(
            ad.matmul(ad.tanh(ad.matmul(rear, v["scan_rear.w0"]) + v["scan_rear.b0"]),
                      v["scan_rear.w1"]) + v["scan_rear.b1"]
        )
        h = ad.tanh(ad.matmul(ad.concat([ef, er, prop], axis=1), v["trunk.w0"]) + v["trunk.b0"])
        h = ad.tanh(ad.matmul(h, v["trunk.w1"]) + v["trunk.b1"])
        logits = [
            ad.matmul(h, v[f"head{d}.w"]) + v[f"head{d}.b"] for d in range(cfg.action_dims)
        ]
        value = ad.matmul(h, v["value.w"]) + v["value.b"]
        return logits, value.reshape(-1), v

    def gradient_from(self, param_tensors: dict[str, ad.Tensor]) -> np.ndarray:
        """Flat gradient in layout order after backward() has run."""
        grad = np.zeros_like(self.params)
        for name, shape, offset in layout(self.config):
            t = param_tensors[name]
            size = int(np.prod(shape))
            if t.grad is not None:
                grad[offset : offset + size] = t.grad.ravel()
        return grad


# -- action distribution helpers ---------------------------------------------

def log_softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def distribution_stats(logits: np.ndarray, bins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log_prob, entropy) of chosen bins under logits (..., dims, bins)."""
    logp = log_softmax_np(logits)
    probs = np.exp(logp)
    taken = np.take_along_axis(logp, bins[..., None], axis=-1)[..., 0]
    entropy = -(probs * logp).sum(axis=-1)
    return taken.sum(axis=-1), entropy.sum(axis=-1)


def sample_bins(output: PolicyOutput, rng: np.random.Generator) -> tuple[np.ndarray, float, float]:
    """One bin index per action dimension via inverse-CDF sampling."""
    logp = log_softmax_np(output.logits)
    probs = np.exp(logp)
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=-1)
    bins = np.minimum(
        (u[:, None] > cum).sum(axis=-1), probs.shape[-1] - 1
    ).astype(np.int64)
    log_prob, entropy = distribution_stats(output.logits, bins)
    return bins, float(log_prob), float(entropy)


def greedy_bins(output: PolicyOutput) -> np.ndarray:
    return output.logits.argmax(axis=-1).astype(np.int64)


def acceleration_limits(robot: RobotConfig) -> np.ndarray:
    return np.concatenate(
        [np.asarray(robot.max_base_acc, dtype=float),
         np.full(robot.num_joints, robot.max_joint_acc, dtype=float)]
    )


def bins_to_action(robot: RobotConfig, bins: np.ndarray, n_bins: int) -> Action:
    """Affine bin-to-acceleration map; the center bin is exactly zero."""
    limits = acceleration_limits(robot)
    acc = (2.0 * bins / (n_bins - 1) - 1.0) * limits
    return Action(base_acc=acc[:3], joint_acc=acc[3:])


def sample_action(
    robot: RobotConfig, output: PolicyOutput, rng: np.random.Generator
) -> tuple[Action, np.ndarray, float, float]:
    """(Action, bins, log_prob, entropy) sampled from the policy output."""
    bins, log_prob, entropy = sample_bins(output, rng)
    return bins_to_action(robot, bins, output.logits.shape[-1]), bins, log_prob, entropy


def greedy_action(robot: RobotConfig, output: PolicyOutput) -> tuple[Action, np.ndarray]:
    bins = greedy_bins(output)
    return bins_to_action(robot, bins, output.logits.shape[-1]), bins


# -- checkpointing -------------------------------------------------------------

def config_hash(config) -> bytes:
    """SHA-256 over the canonical JSON form of any dataclass config."""
    text = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).digest()


def save_params(path, config: PolicyConfig, params: np.ndarray) -> None:
    """Versioned binary checkpoint: header, config hash, flat float64 params."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    blob = (
        CHECKPOINT_MAGIC
        + struct.pack("<I", CHECKPOINT_VERSION)
        + config_hash(config)
        + struct.pack("<Q", params.size)
        + params.astype("<f8").tobytes()
    )
    Path(path).write_bytes(blob)


def load_params(path, config: PolicyConfig) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a policy checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    digest = raw[12:44]
    if digest != config_hash(config):
        raise ValueError("checkpoint was written for a different policy config")
    (count,) = struct.unpack_from("<Q", raw, 44)
    expected = param_count(config)
    if count != expected:
        raise ValueError(f"checkpoint holds {count} params, config needs {expected}")
    params = np.frombuffer(raw, dtype="<f8", count=count, offset=52).astype(np.float64)
    return np.ascontiguousarray(params)
