"""On-policy trainer: rollout collection, GAE, clipped-surrogate updates.

Workers step their own environments with a shared parameter snapshot, episode
terminations feed the tolerance curriculum, advantages come from generalized
advantage estimation, and each update runs multiple shuffled minibatch epochs
of the clipped PPO objective through the taped network with Adam. Training
state (parameters, optimizer moments, curriculum, RNG streams, and live
episode states) checkpoints to a single file, so a resumed single-worker run
reproduces the uninterrupted parameter trajectory exactly.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import adr as adr_mod
from . import autodiff as ad
from .envs import Episode, env_step, episode_from_dict, episode_to_dict, new_episode
from .policy import Policy, config_hash, param_count, sample_action, save_params

TRAIN_MAGIC = b"PWBCTRN1"
TRAIN_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """PPO hyperparameters and run sizing."""

    total_steps: int = 500_000
    workers: int = 1
    steps_per_worker: int = 2048
    minibatches: int = 8
    epochs: int = 30
    clip_range: float = 0.2
    clip_range_vf: float = -1.0
    gamma: float = 0.999
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    normalize_advantages: bool = True
    seed: int = 0
    checkpoint_interval: int = 25

    def validate(self) -> list[str]:
        errors = []
        for name in ("total_steps", "workers", "steps_per_worker", "minibatches", "epochs"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1")
        if self.workers * self.steps_per_worker % self.minibatches != 0:
            errors.append("minibatches must divide workers * steps_per_worker")
        if not 0.0 < self.clip_range < 1.0:
            errors.append("clip_range must be in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            errors.append("gamma must be in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            errors.append("gae_lambda must be in [0, 1]")
        if self.learning_rate <= 0.0:
            errors.append("learning_rate must be > 0")
        if self.checkpoint_interval < 1:
            errors.append("checkpoint_interval must be >= 1")
        return errors


@dataclass
class RolloutBuffer:
    """Fixed-horizon per-worker transition arrays plus GAE outputs."""

    obs: np.ndarray  # (W, n, obs)
    bins: np.ndarray  # (W, n, dims)
    log_probs: np.ndarray  # (W, n)
    values: np.ndarray  # (W, n)
    rewards: np.ndarray  # (W, n)
    dones: np.ndarray  # (W, n) bool
    bootstrap: np.ndarray  # (W,) value of the state after the horizon
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float) -> RolloutBuffer:
    """Exponentially weighted advantage recursion, truncated per rollout row."""
    w, n = buffer.rewards.shape
    adv = np.zeros((w, n))
    next_value = buffer.bootstrap.copy()
    carry = np.zeros(w)
    for t in range(n - 1, -1, -1):
        live = 1.0 - buffer.dones[:, t]
        delta = buffer.rewards[:, t] + gamma * next_value * live - buffer.values[:, t]
        carry = delta + gamma * lam * live * carry
        adv[:, t] = carry
        next_value = buffer.values[:, t]
    buffer.advantages = adv
    buffer.returns = adv + buffer.values
    return buffer


@dataclass
class EpisodeRecord:
    """One finished episode, as logged to metrics.csv."""

    global_step: int
    worker: int
    episode_return: float
    episode_length: int
    termination: str
    tolerance: float


@dataclass
class Worker:
    """One rollout worker: its RNG stream, live episode, running tallies."""

    index: int
    rng: np.random.Generator
    episode: Episode
    obs_vec: np.ndarray
    episode_return: float = 0.0
    episode_length: int = 0


@dataclass
class TrainerState:
    """Everything a training run needs to continue deterministically."""

    policy: Policy
    adam_m: np.ndarray
    adam_v: np.ndarray
    adam_t: int
    update_rng: np.random.Generator
    workers: list[Worker]
    adr_state: adr_mod.AdrState
    global_step: int = 0
    update_count: int = 0


def _episode_tolerance(run, adr_state: adr_mod.AdrState) -> float:
    if run.adr.enabled:
        return adr_mod.current_tolerance(adr_state)
    return run.episode.tolerance


def _start_episode(run, rng: np.random.Generator, tolerance: float) -> Episode:
    cfg = replace(run.episode, tolerance=tolerance)
    return new_episode(run.env, run.robot, run.reward, cfg, rng)


def collect_rollouts(
    run, trainer: TrainerState
) -> tuple[RolloutBuffer, list[EpisodeRecord]]:
    """Advance every worker a fixed horizon under the current parameters.

    Worker order is fixed, so curriculum updates and the resulting buffer are
    reproducible for a given seed.
    """
    tc: TrainConfig = run.train
    n = tc.steps_per_worker
    w = tc.workers
    policy = trainer.policy
    obs_size = policy.config.observation_size
    dims = policy.config.action_dims
    buffer = RolloutBuffer(
        obs=np.zeros((w, n, obs_size)),
        bins=np.zeros((w, n, dims), dtype=np.int64),
        log_probs=np.zeros((w, n)),
        values=np.zeros((w, n)),
        rewards=np.zeros((w, n)),
        dones=np.zeros((w, n), dtype=bool),
        bootstrap=np.zeros(w),
    )
    records: list[EpisodeRecord] = []
    base_step = trainer.global_step
    for wk in trainer.workers:
        for t in range(n):
            out = policy.forward(wk.obs_vec)
            action, bins, log_prob, _ = sample_action(run.robot, out, wk.rng)
            try:
                outcome = env_step(wk.episode, action)
            except Exception as exc:
                raise RuntimeError(f"worker {wk.index}: environment step failed") from exc
            buffer.obs[wk.index, t] = wk.obs_vec
            buffer.bins[wk.index, t] = bins
            buffer.log_probs[wk.index, t] = log_prob
            buffer.values[wk.index, t] = out.value
            buffer.rewards[wk.index, t] = outcome.reward
            wk.episode_return += outcome.reward
            wk.episode_length += 1
            if outcome.terminated is not None:
                buffer.dones[wk.index, t] = True
                records.append(
                    EpisodeRecord(
                        global_step=base_step + wk.index * n + t + 1,
                        worker=wk.index,
                        episode_return=wk.episode_return,
                        episode_length=wk.episode_length,
                        termination=outcome.terminated,
                        tolerance=wk.episode.config.tolerance,
                    )
                )
                if run.adr.enabled:
                    trainer.adr_state = adr_mod.record_episode(
                        run.adr, trainer.adr_state, outcome.terminated == "success"
                    )
                wk.episode = _start_episode(
                    run, wk.rng, _episode_tolerance(run, trainer.adr_state)
                )
                wk.obs_vec = wk.episode.observation().to_vector()
                wk.episode_return = 0.0
                wk.episode_length = 0
            else:
                wk.obs_vec = outcome.observation.to_vector()
        buffer.bootstrap[wk.index] = policy.forward(wk.obs_vec).value
    trainer.global_step += w * n
    return buffer, records


def _global_norm(grad: np.ndarray) -> float:
    return float(np.sqrt(np.dot(grad, grad)))


def adam_step(
    trainer: TrainerState, grad: np.ndarray, lr: float,
    beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
) -> None:
    """In-place adaptive moment update of the policy's flat parameters."""
    trainer.adam_t += 1
    trainer.adam_m[...] = beta1 * trainer.adam_m + (1.0 - beta1) * grad
    trainer.adam_v[...] = beta2 * trainer.adam_v + (1.0 - beta2) * grad * grad
    m_hat = trainer.adam_m / (1.0 - beta1**trainer.adam_t)
    v_hat = trainer.adam_v / (1.0 - beta2**trainer.adam_t)
    trainer.policy.params[...] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def ppo_loss(
    policy: Policy,
    obs: np.ndarray,
    bins: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    old_values: np.ndarray,
    config: TrainConfig,
):
    """Taped PPO objective on one minibatch.

    Returns (loss tensor, parameter tensors, stats dict). The surrogate uses
    the clipped probability ratio; value clipping engages only when
    clip_range_vf is positive.
    """
    logits, value, params = policy.graph_forward(obs)
    n, dims = bins.shape
    n_bins = policy.config.bins
    log_prob_terms = []
    entropy_terms = []
    for d in range(dims):
        logp = ad.log_softmax(logits[d], axis=1)
        onehot = np.zeros((n, n_bins))
        onehot[np.arange(n), bins[:, d]] = 1.0
        log_prob_terms.append((logp * ad.Tensor(onehot)).sum(axis=1))
        entropy_terms.append((ad.exp(logp) * logp).sum(axis=1) * -1.0)
    new_log_prob = log_prob_terms[0]
    entropy = entropy_terms[0]
    for d in range(1, dims):
        new_log_prob = new_log_prob + log_prob_terms[d]
        entropy = entropy + entropy_terms[d]

    ratio = ad.exp(new_log_prob - ad.Tensor(old_log_probs))
    adv = ad.Tensor(advantages)
    unclipped = ratio * adv
    clipped = ad.clip(ratio, 1.0 - config.clip_range, 1.0 + config.clip_range) * adv
    policy_loss = -(ad.minimum(unclipped, clipped).mean())

    ret = ad.Tensor(returns)
    if config.clip_range_vf > 0.0:
        delta = ad.clip(value - ad.Tensor(old_values), -config.clip_range_vf,
                        config.clip_range_vf)
        v_clipped = ad.Tensor(old_values) + delta
        value_loss = ad.maximum((value - ret) ** 2, (v_clipped - ret) ** 2).mean()
    else:
        value_loss = ((value - ret) ** 2).mean()
    entropy_mean = entropy.mean()
    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy_mean

    ratio_data = ratio.data
    stats = {
        "policy_loss": float(policy_loss.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy_mean.data),
        "ratio_mean": float(ratio_data.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio_data - 1.0) > config.clip_range)),
    }
    return loss, params, stats


def ppo_update(run, trainer: TrainerState, buffer: RolloutBuffer) -> dict:
    """Multi-epoch shuffled minibatch optimization of the PPO objective."""
    tc: TrainConfig = run.train
    if buffer.advantages is None or buffer.returns is None:
        raise ValueError("compute_gae must run before ppo_update")
    n_total = buffer.rewards.size
    obs = buffer.obs.reshape(n_total, -1)
    bins = buffer.bins.reshape(n_total, -1)
    old_log_probs = buffer.log_probs.reshape(n_total)
    old_values = buffer.values.reshape(n_total)
    returns = buffer.returns.reshape(n_total)
    advantages = buffer.advantages.reshape(n_total)
    if tc.normalize_advantages:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    mb_size = n_total // tc.minibatches
    totals: dict[str, float] = {}
    count = 0
    for _ in range(tc.epochs):
        perm = trainer.update_rng.permutation(n_total)
        for k in range(tc.minibatches):
            idx = perm[k * mb_size : (k + 1) * mb_size]
            loss, params, stats = ppo_loss(
                trainer.policy, obs[idx], bins[idx], old_log_probs[idx],
                advantages[idx], returns[idx], old_values[idx], tc,
            )
            if not np.isfinite(loss.data):
                raise RuntimeError(f"non-finite PPO loss: {stats}")
            loss.backward()
            grad = trainer.policy.gradient_from(params)
            if tc.max_grad_norm > 0.0:
                norm = _global_norm(grad)
                if norm > tc.max_grad_norm:
                    grad *= tc.max_grad_norm / norm
            adam_step(trainer, grad, tc.learning_rate)
            for key, value in stats.items():
                totals[key] = totals.get(key, 0.0) + value
            count += 1
    trainer.update_count += 1
    mean_stats = {key: value / count for key, value in totals.items()}
    mean_stats["update"] = trainer.update_count
    mean_stats["global_step"] = trainer.global_step
    return mean_stats


# ---------------------------------------------------------------------------
# Training state persistence
# ---------------------------------------------------------------------------

def _run_hash(run) -> bytes:
    """Config hash binding checkpoints to a run.

    total_steps is zeroed out first: extending the step budget of a resumed
    run must not invalidate its checkpoint, everything else must.
    """
    return config_hash(replace(run, train=replace(run.train, total_steps=0)))


def save_train_checkpoint(path, run, trainer: TrainerState) -> None:
    """One-file snapshot: params, Adam moments, curriculum, RNGs, episodes."""
    params = trainer.policy.params
    meta = {
        "adam_t": trainer.adam_t,
        "global_step": trainer.global_step,
        "update_count": trainer.update_count,
        "adr": adr_mod.state_to_dict(trainer.adr_state),
        "update_rng": trainer.update_rng.bit_generator.state,
        "workers": [
            {
                "rng": wk.rng.bit_generator.state,
                "episode": episode_to_dict(wk.episode),
                "episode_return": wk.episode_return,
                "episode_length": wk.episode_length,
            }
            for wk in trainer.workers
        ],
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    out = (
        TRAIN_MAGIC
        + struct.pack("<I", TRAIN_VERSION)
        + _run_hash(run)
        + struct.pack("<Q", params.size)
        + params.astype("<f8").tobytes()
        + trainer.adam_m.astype("<f8").tobytes()
        + trainer.adam_v.astype("<f8").tobytes()
        + struct.pack("<Q", len(blob))
        + blob
    )
    Path(path).write_bytes(out)


def load_train_checkpoint(path, run) -> TrainerState:
    raw = Path(path).read_bytes()
    if raw[:8] != TRAIN_MAGIC:
        raise ValueError("not a training checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != TRAIN_VERSION:
        raise ValueError(f"unsupported training checkpoint version {version}")
    if raw[12:44] != _run_hash(run):
        raise ValueError("training checkpoint was written for a different run config")
    (count,) = struct.unpack_from("<Q", raw, 44)
    expected = param_count(run.policy)
    if count != expected:
        raise ValueError(f"checkpoint holds {count} params, config needs {expected}")
    offset = 52
    arrays = []
    for _ in range(3):
        arrays.append(
            np.frombuffer(raw, dtype="<f8", count=count, offset=offset).astype(np.float64)
        )
        offset += 8 * count
    (blob_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    meta = json.loads(raw[offset : offset + blob_len].decode())

    policy = Policy(run.policy, arrays[0])
    update_rng = np.random.default_rng()
    update_rng.bit_generator.state = meta["update_rng"]
    workers = []
    for index, wmeta in enumerate(meta["workers"]):
        rng = np.random.default_rng()
        rng.bit_generator.state = wmeta["rng"]
        episode = episode_from_dict(run.robot, run.reward, wmeta["episode"])
        workers.append(
            Worker(
                index=index,
                rng=rng,
                episode=episode,
                obs_vec=episode.observation().to_vector(),
                episode_return=wmeta["episode_return"],
                episode_length=wmeta["episode_length"],
            )
        )
    return TrainerState(
        policy=policy,
        adam_m=arrays[1],
        adam_v=arrays[2],
        adam_t=meta["adam_t"],
        update_rng=update_rng,
        workers=workers,
        adr_state=adr_mod.state_from_dict(meta["adr"]),
        global_step=meta["global_step"],
        update_count=meta["update_count"],
    )


def init_trainer(run) -> TrainerState:
    """Seed-derived fresh training state: params, RNG streams, live episodes."""
    from .policy import init_params

    tc: TrainConfig = run.train
    seeds = np.random.SeedSequence(tc.seed).spawn(tc.workers + 2)
    init_rng = np.random.default_rng(seeds[tc.workers])
    update_rng = np.random.default_rng(seeds[tc.workers + 1])
    policy = Policy(run.policy, init_params(run.policy, init_rng))
    adr_state = adr_mod.fresh_state(run.adr)
    workers = []
    for index in range(tc.workers):
        rng = np.random.default_rng(seeds[index])
        episode = _start_episode(run, rng, _episode_tolerance(run, adr_state))
        workers.append(
            Worker(
                index=index,
                rng=rng,
                episode=episode,
                obs_vec=episode.observation().to_vector(),
            )
        )
    n = param_count(run.policy)
    return TrainerState(
        policy=policy,
        adam_m=np.zeros(n),
        adam_v=np.zeros(n),
        adam_t=0,
        update_rng=update_rng,
        workers=workers,
        adr_state=adr_state,
    )


def train_loop(run, out_dir, resume: str | None = None, log_every: int = 1) -> dict:
    """Alternate collection and updates until the step budget is spent.

    Writes metrics.csv (per finished episode), updates.jsonl (per update),
    adr.csv (tolerance trace), train_state.ckpt (resumable full state), and
    policy.ckpt (inference-only parameters) under out_dir.
    """
    issues = run.validate() if hasattr(run, "validate") else []
    if issues:
        raise ValueError("; ".join(issues))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    updates_path = out_dir / "updates.jsonl"
    adr_path = out_dir / "adr.csv"

    if resume is not None:
        trainer = load_train_checkpoint(resume, run)
    else:
        trainer = init_trainer(run)
        metrics_path.write_text(
            "global_step,worker,episode_return,episode_length,termination,tolerance\n"
        )
        updates_path.write_text("")
        adr_path.write_text("global_step,tolerance\n")

    tc: TrainConfig = run.train
    last_tolerance = adr_mod.current_tolerance(trainer.adr_state)
    while trainer.global_step < tc.total_steps:
        buffer, records = collect_rollouts(run, trainer)
        compute_gae(buffer, tc.gamma, tc.gae_lambda)
        stats = ppo_update(run, trainer, buffer)

        with metrics_path.open("a") as fh:
            for rec in records:
                fh.write(
                    f"{rec.global_step},{rec.worker},{rec.episode_return!r},"
                    f"{rec.episode_length},{rec.termination},{rec.tolerance!r}\n"
                )
        tolerance = adr_mod.current_tolerance(trainer.adr_state)
        stats["adr_tolerance"] = tolerance
        if trainer.update_count % log_every == 0:
            with updates_path.open("a") as fh:
                fh.write(json.dumps(stats, sort_keys=True) + "\n")
        if tolerance != last_tolerance:
            with adr_path.open("a") as fh:
                fh.write(f"{trainer.global_step},{tolerance!r}\n")
            last_tolerance = tolerance
        if trainer.update_count % tc.checkpoint_interval == 0:
            save_train_checkpoint(out_dir / "train_state.ckpt", run, trainer)
            save_params(out_dir / "policy.ckpt", run.policy, trainer.policy.params)

    save_train_checkpoint(out_dir / "train_state.ckpt", run, trainer)
    save_params(out_dir / "policy.ckpt", run.policy, trainer.policy.params)
    return {
        "global_step": trainer.global_step,
        "updates": trainer.update_count,
        "checkpoint": str(out_dir / "train_state.ckpt"),
        "policy_checkpoint": str(out_dir / "policy.ckpt"),
    }
