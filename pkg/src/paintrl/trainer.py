"""PPO training loop with curriculum horizons and difficulty-based sampling.

Each episode picks a reference patch (by default the one the value network
scores worst from a blank-canvas reset observation), collects a trajectory
whose length is controlled by a rising reward threshold, computes
generalized advantage estimates, and applies clipped-surrogate PPO updates
with Adam. The whole loop is a deterministic function of (seed, config,
dataset): per-episode generators derive from (seed, episode index).
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .env import EnvConfig, PaintEnv, extract_patches, new_canvas
from .losses import LossKind, gaussian_blur
from .net import (
    ACTION_DIM,
    ARCHS,
    LOG_STD_MAX,
    LOG_STD_MIN,
    NetworkParams,
    backprop_heads,
    forward,
    forward_batch,
    gaussian_log_prob,
    init_params,
    sample_action,
    save_params,
)

__all__ = [
    "Adam",
    "TrainConfig",
    "Trajectory",
    "Transition",
    "collect_trajectory",
    "compute_advantages",
    "curriculum_horizon",
    "eval_policy",
    "ppo_update",
    "schedule_thresh",
    "select_reference",
    "train",
]

METRICS_HEADER = "episode,mean_reward,surrogate,value_loss,entropy,clip_fraction,horizon"


@dataclass
class Transition:
    """One step of an episode.

    `action` is the unclipped Gaussian sample, the point at which `log_prob`
    was evaluated; the environment executed its clip to [0, 1].
    """

    observation: np.ndarray
    action: np.ndarray
    log_prob: float
    reward: float
    value: float
    done: bool


@dataclass
class Trajectory:
    """One episode as stacked arrays, plus its source reference index."""

    observations: np.ndarray  # (T, h_o, 2*w_o, 3)
    actions: np.ndarray       # (T, 6) unclipped samples
    log_probs: np.ndarray     # (T,)
    rewards: np.ndarray       # (T,)
    values: np.ndarray        # (T,)
    dones: np.ndarray         # (T,) bool
    ref_index: int = 0

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())

    @classmethod
    def from_transitions(cls, transitions, ref_index: int = 0) -> "Trajectory":
        if not transitions:
            raise ValueError("a trajectory needs at least one transition")
        return cls(
            observations=np.stack([t.observation for t in transitions]),
            actions=np.stack([t.action for t in transitions]),
            log_probs=np.array([t.log_prob for t in transitions]),
            rewards=np.array([t.reward for t in transitions]),
            values=np.array([t.value for t in transitions]),
            dones=np.array([t.done for t in transitions], dtype=bool),
            ref_index=ref_index,
        )


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of the training loop; see README for the file format."""

    gamma: float = 0.95            # reward discount
    lam: float = 0.9               # advantage smoothing
    clip_eps: float = 0.2          # PPO ratio clip
    epochs: int = 4                # update epochs per collected batch
    minibatch_size: int = 64
    learning_rate: float = 3e-4
    learning_rate_end: float = -1.0  # < 0: constant; else linear decay target
    entropy_coef: float = 1e-3
    value_coef: float = 0.5
    episodes: int = 1000           # total training episodes
    episodes_per_update: int = 1   # trajectories batched into one update cycle
    dataset_size: int = 0          # use only the first n patches (0 = all)
    r_thresh_start: float = 0.02   # curriculum threshold at episode 0
    r_thresh_step: float = -1.0    # per-episode increase (< 0: ramp over first half)
    r_thresh_max: float = 0.3
    t_max: int = 20                # hard episode-length cap
    blur_sigma: float = 0.0        # reference blur inside observations only
    loss: str = "l2"               # l2 | lhalf | perceptual
    seed: int = 0
    curriculum: bool = True        # False: fixed t_max horizons
    sampler: str = "difficulty"    # difficulty | mean_reward | uniform
    max_env_steps: int = 0         # stop after this many env steps (0 = off)
    checkpoint_every: int = 0      # episodes between checkpoints (0 = final only)
    rollout_init_prob: float = 0.0  # chance to start from a painted canvas
    arch: str = "small"            # network preset: small | default
    workers: int = 1               # reserved upper bound for parallel collection
    env: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self):
        if not (0 <= self.gamma <= 1 and 0 <= self.lam <= 1):
            raise ValueError("gamma and lam must lie in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.episodes < 1 or self.t_max < 1 or self.epochs < 1:
            raise ValueError("episodes, t_max and epochs must be >= 1")
        if self.episodes_per_update < 1:
            raise ValueError("episodes_per_update must be >= 1")
        if self.minibatch_size < 1 or self.workers < 1:
            raise ValueError("minibatch_size and workers must be >= 1")
        if self.sampler not in ("difficulty", "mean_reward", "uniform"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.loss not in ("l2", "lhalf", "perceptual"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch preset {self.arch!r} (have {sorted(ARCHS)})")
        if not 0 <= self.rollout_init_prob <= 1:
            raise ValueError("rollout_init_prob must lie in [0, 1]")


def curriculum_horizon(rewards, r_thresh: float, t_max_cap: int) -> int:
    """Effective episode length: first step whose reward exceeds the
    threshold, or the cap when none does (1-based)."""
    if t_max_cap < 1:
        raise ValueError("t_max_cap must be >= 1")
    for i, r in enumerate(rewards[:t_max_cap]):
        if r > r_thresh:
            return i + 1
    return t_max_cap


def schedule_thresh(episode: int, cfg: TrainConfig) -> float:
    """Reward threshold for an episode: linear ramp from start to max.

    A negative configured step means "ramp over the first half of training".
    """
    if episode < 0:
        raise ValueError("episode must be >= 0")
    step = cfg.r_thresh_step
    if step < 0:
        ramp = max(1.0, cfg.episodes / 2.0)
        step = (cfg.r_thresh_max - cfg.r_thresh_start) / ramp
    return min(cfg.r_thresh_start + episode * step, cfg.r_thresh_max)


def reset_observation(patch: np.ndarray, env_cfg: EnvConfig,
                      blur_sigma: float = 0.0) -> np.ndarray:
    """Observation of a fresh episode on `patch`: white canvas, centered pen."""
    ref = gaussian_blur(patch, blur_sigma) if blur_sigma > 0 else patch
    canvas = new_canvas(patch.shape[0], patch.shape[1])
    pen = ((patch.shape[1] - 1) / 2.0, (patch.shape[0] - 1) / 2.0)
    return extract_patches(canvas, ref, pen, env_cfg)


def select_reference(dataset: Dataset, params: NetworkParams, env_cfg: EnvConfig,
                     blur_sigma: float = 0.0, value_fn=None) -> int:
    """Index of the patch the value network rates hardest from reset.

    Difficulty is the value estimate of each patch's reset-state observation;
    the lowest estimate wins, ties by lowest index.
    """
    obs = np.stack([
        reset_observation(p, env_cfg, blur_sigma) for p in dataset.patches
    ])
    if value_fn is not None:
        values = np.asarray(value_fn(obs), dtype=np.float64)
    else:
        _, values = forward_batch(params, obs)
    return int(np.argmin(values))


def collect_trajectory(env: PaintEnv, params: NetworkParams, r_thresh: float,
                       t_max: int, rng: np.random.Generator,
                       blur_sigma: float = 0.0, ref_index: int = 0) -> Trajectory:
    """Roll one episode, stopping at the curriculum horizon.

    With `blur_sigma` > 0 the policy observes a blurred reference while the
    environment's reward keeps scoring against the sharp one.
    """
    blurred = gaussian_blur(env.reference, blur_sigma) if blur_sigma > 0 else None
    obs = env.observe(reference=blurred)
    transitions = []
    for t in range(t_max):
        out = forward(params, obs)
        action, log_prob, raw = sample_action(out, rng)
        reward, next_obs = env.step(action)
        if blurred is not None:
            next_obs = env.observe(reference=blurred)
        done = reward > r_thresh or t == t_max - 1
        transitions.append(Transition(obs, raw, log_prob, reward, out.value, done))
        if done:
            break
        obs = next_obs
    return Trajectory.from_transitions(transitions, ref_index)


def compute_advantages(traj: Trajectory, gamma: float, lam: float):
    """Generalized advantage estimates and value targets.

    delta_t = r_t + gamma*V_{t+1} - V_t with V past the end taken as 0;
    advantage_t sums (gamma*lam)^k delta_{t+k}; returns = advantage + V.
    """
    rewards, values = traj.rewards, traj.values
    n = len(rewards)
    advantages = np.zeros(n)
    acc = 0.0
    for t in reversed(range(n)):
        next_value = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        acc = delta + gamma * lam * acc
        advantages[t] = acc
    return advantages, advantages + values


class Adam:
    """Adaptive-moment gradient descent over a parameter container."""

    def __init__(self, params: NetworkParams, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.param_items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.param_items()}

    def step(self, params: NetworkParams, grads: dict) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, arr in params.param_items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            arr -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def _ppo_loss_and_grads(params: NetworkParams, obs, actions, old_log_probs,
                        advantages, returns, cfg: TrainConfig):
    """Minimized PPO objective on one minibatch and its exact gradients.

    objective = -surrogate + value_coef * value MSE - entropy_coef * entropy,
    with surrogate = mean(min(ratio*A, clip(ratio, 1-eps, 1+eps)*A)).
    """
    m = len(obs)
    mean, value, cache = forward_batch(params, obs, want_cache=True)
    log_std = np.clip(params.log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    new_lp = gaussian_log_prob(mean, log_std, actions)
    ratio = np.exp(new_lp - old_log_probs)
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surr_raw = ratio * advantages
    surr_clip = clipped * advantages
    surrogate = float(np.minimum(surr_raw, surr_clip).mean())
    value_err = value - returns
    value_loss = float(np.mean(value_err * value_err))
    entropy = float(np.sum(log_std + 0.5 * (1.0 + math.log(2.0 * math.pi))))
    loss = -surrogate + cfg.value_coef * value_loss - cfg.entropy_coef * entropy

    # d loss / d ratio: the min picks the raw branch on ties; the clipped
    # branch contributes only while the ratio is strictly inside the window.
    use_raw = surr_raw <= surr_clip
    inside = (ratio > 1.0 - cfg.clip_eps) & (ratio < 1.0 + cfg.clip_eps)
    d_ratio = np.where(use_raw, advantages, np.where(inside, advantages, 0.0)) / m
    d_new_lp = -d_ratio * ratio  # minimizing the negated surrogate
    z = (actions - mean) / std
    d_mean = d_new_lp[:, None] * z / std
    d_log_std = np.sum(d_new_lp[:, None] * (z * z - 1.0), axis=0)
    d_log_std -= cfg.entropy_coef  # d entropy / d log_std = 1 per dimension
    d_value = cfg.value_coef * 2.0 * value_err / m
    grads = backprop_heads(params, cache, d_mean, d_value, d_log_std)
    stats = {
        "surrogate": surrogate,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(~inside)),
    }
    return loss, grads, stats


def ppo_update(params: NetworkParams, batch: dict, cfg: TrainConfig,
               optimizer: Adam, rng: np.random.Generator):
    """Run clipped-surrogate updates over the batch; mutates `params`.

    `batch` holds observations, actions (unclipped samples), log_probs,
    advantages and returns as stacked arrays. Advantages are normalized to
    zero mean and unit variance within the batch (left alone for a single
    transition). Returns (params, stats) with batch-averaged statistics.
    """
    n = len(batch["observations"])
    if n == 0:
        raise ValueError("ppo_update needs a non-empty batch")
    advantages = np.asarray(batch["advantages"], dtype=np.float64)
    if n > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    totals = {"surrogate": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0}
    count = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch_size):
            idx = perm[lo : lo + cfg.minibatch_size]
            _, grads, stats = _ppo_loss_and_grads(
                params,
                batch["observations"][idx],
                batch["actions"][idx],
                batch["log_probs"][idx],
                advantages[idx],
                batch["returns"][idx],
                cfg,
            )
            optimizer.step(params, grads)
            params.log_std = np.clip(params.log_std, LOG_STD_MIN, LOG_STD_MAX)
            for key in totals:
                totals[key] += stats[key]
            count += 1
    return params, {key: totals[key] / count for key in totals}


def eval_policy(params: NetworkParams, dataset: Dataset, env_cfg: EnvConfig,
                loss_kind: LossKind, t_max: int, blur_sigma: float = 0.0) -> dict:
    """Deterministic evaluation: mean-action episodes on every patch.

    Reports the mean episode return and the mean final/initial loss ratio
    (a patch already solved at reset counts as ratio 0).
    """
    returns, ratios = [], []
    for patch in dataset.patches:
        env = PaintEnv(patch, env_cfg, loss_kind)
        blurred = gaussian_blur(patch, blur_sigma) if blur_sigma > 0 else None
        obs = env.observe(reference=blurred)
        total = 0.0
        for _ in range(t_max):
            out = forward(params, obs)
            reward, obs = env.step(np.clip(out.mean, 0.0, 1.0))
            if blurred is not None:
                obs = env.observe(reference=blurred)
            total += reward
        returns.append(total)
        if env.initial_loss == 0.0:
            ratios.append(0.0)
        else:
            ratios.append(env.prev_loss / env.initial_loss)
    return {
        "mean_reward": float(np.mean(returns)),
        "mean_loss_ratio": float(np.mean(ratios)),
    }


def _select_indices(dataset, params, cfg, rng, k):
    """Reference indices for one update cycle, hardest first.

    With k == 1 this is exactly the argmin difficulty rule; larger cycles
    take the k hardest references (one episode each), which both follows
    "sample more from the worst" and gives PPO mixed-reference batches.
    Fewer references than k wraps around the difficulty order.
    """
    if cfg.sampler == "uniform":
        return [int(rng.integers(len(dataset))) for _ in range(k)]
    if cfg.sampler == "mean_reward":
        order = np.argsort(dataset.mean_rewards(), kind="stable")
    else:
        obs = np.stack([
            reset_observation(p, cfg.env, cfg.blur_sigma) for p in dataset.patches
        ])
        _, values = forward_batch(params, obs)
        order = np.argsort(values, kind="stable")
    return [int(order[i % len(order)]) for i in range(k)]


def _format_row(episode, mean_reward, stats, horizon):
    return (
        f"{episode},{mean_reward:.10g},{stats['surrogate']:.10g},"
        f"{stats['value_loss']:.10g},{stats['entropy']:.10g},"
        f"{stats['clip_fraction']:.10g},{horizon}"
    )


def train(cfg: TrainConfig, dataset: Dataset, out_dir,
          init: NetworkParams | None = None, start_episode: int = 0,
          log_fn=None):
    """Full training run; writes metrics.csv and checkpoints under out_dir.

    Returns (params, metric rows). `init` and `start_episode` support
    resuming: metrics append to an existing file and episode numbering
    continues. The run is a deterministic function of (seed, config,
    dataset).
    """
    os.makedirs(out_dir, exist_ok=True)
    if cfg.dataset_size > 0:
        dataset = dataset.subset(cfg.dataset_size)
    env_cfg = cfg.env
    loss_kind = LossKind(cfg.loss)
    if init is not None:
        params = init
    else:
        params = init_params(env_cfg.h_o, 2 * env_cfg.w_o, cfg.seed, arch=cfg.arch)
    optimizer = Adam(params, cfg.learning_rate)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    mode = "a" if start_episode > 0 and os.path.exists(metrics_path) else "w"
    rows = []
    steps_total = 0
    episode = start_episode
    end_episode = start_episode + cfg.episodes
    with open(metrics_path, mode) as metrics:
        if mode == "w":
            metrics.write(METRICS_HEADER + "\n")
        while episode < end_episode:
            if cfg.max_env_steps and steps_total >= cfg.max_env_steps:
                break
            if cfg.learning_rate_end >= 0:
                if cfg.max_env_steps:
                    progress = steps_total / cfg.max_env_steps
                else:
                    progress = (episode - start_episode) / cfg.episodes
                progress = min(1.0, progress)
                optimizer.lr = (cfg.learning_rate
                                + (cfg.learning_rate_end - cfg.learning_rate) * progress)
            # one cycle: collect one episode from each of the hardest
            # references, then run one PPO update on the combined batch
            cycle_rng = np.random.default_rng([cfg.seed, episode])
            n_eps = min(cfg.episodes_per_update, end_episode - episode)
            indices = _select_indices(dataset, params, cfg, cycle_rng, n_eps)
            trajectories = []
            for idx in indices:
                patch = dataset.patches[idx]
                rng = np.random.default_rng([cfg.seed, episode])
                r_thresh = schedule_thresh(episode - start_episode, cfg)
                init_canvas = None
                if cfg.rollout_init_prob > 0 and rng.random() < cfg.rollout_init_prob:
                    init_canvas = _rollout_canvas(patch, params, env_cfg, loss_kind, rng)
                env = PaintEnv(patch, env_cfg, loss_kind, init_canvas=init_canvas)
                traj = collect_trajectory(
                    env, params, r_thresh if cfg.curriculum else math.inf,
                    cfg.t_max, rng, cfg.blur_sigma, ref_index=idx,
                )
                trajectories.append((episode, traj))
                steps_total += len(traj)
                dataset.record_episode(idx, traj.episode_return)
                episode += 1
            adv_parts, ret_parts = [], []
            for _, traj in trajectories:
                advantages, returns = compute_advantages(traj, cfg.gamma, cfg.lam)
                adv_parts.append(advantages)
                ret_parts.append(returns)
            batch = {
                "observations": np.concatenate([t.observations for _, t in trajectories]),
                "actions": np.concatenate([t.actions for _, t in trajectories]),
                "log_probs": np.concatenate([t.log_probs for _, t in trajectories]),
                "advantages": np.concatenate(adv_parts),
                "returns": np.concatenate(ret_parts),
            }
            params, stats = ppo_update(params, batch, cfg, optimizer, cycle_rng)
            for ep, traj in trajectories:
                row = _format_row(ep, float(traj.rewards.mean()), stats, len(traj))
                metrics.write(row + "\n")
                rows.append(row)
                if log_fn is not None:
                    log_fn(ep, traj, stats)
            done_eps = episode - start_episode
            if cfg.checkpoint_every and done_eps % cfg.checkpoint_every < n_eps and done_eps >= cfg.checkpoint_every:
                save_params(params, os.path.join(out_dir, f"episode_{episode}.ckpt"))
    save_params(params, os.path.join(out_dir, "final.ckpt"))
    return params, rows


def _rollout_canvas(patch, params, env_cfg, loss_kind, rng, strokes: int = 4):
    """Short mean-action rollout used as a perturbed initial canvas."""
    env = PaintEnv(patch, env_cfg, loss_kind)
    for _ in range(strokes):
        env.pen = (float(rng.uniform(0, env.width - 1)),
                   float(rng.uniform(0, env.height - 1)))
        out = forward(params, env.observe())
        env.step(np.clip(out.mean, 0.0, 1.0))
    return env.canvas.copy()
