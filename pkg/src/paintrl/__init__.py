"""Reinforcement-learning painting agent.

A stroke-painting environment with normalized loss-decrease rewards, a
numpy policy/value network with exact reverse-mode gradients, a PPO trainer
with curriculum horizons and difficulty-based reference sampling, and a
coarse-to-fine rollout engine that reproduces reference images as stroke
sequences.
"""

from .config import ConfigError, default_config_text, format_config, load_config, parse_config
from .data import (
    Dataset,
    DatasetFormatError,
    cluster_representatives,
    load_dataset,
    prepare_dataset,
    save_dataset,
)
from .env import (
    EnvConfig,
    PaintEnv,
    StrokeParams,
    advance_pen,
    clamp_pen,
    decode_action,
    extract_patches,
    new_canvas,
    render_segment,
    stamp_segment,
)
from .gradcheck import run_gradcheck
from .imageops import downsample_area, resize_bilinear
from .losses import (
    FeatureStack,
    LossKind,
    gaussian_blur,
    loss_l2,
    loss_lhalf,
    loss_perceptual,
    normalized_reward,
)
from .net import (
    ARCHS,
    Arch,
    CheckpointFormatError,
    ConvSpec,
    NetworkParams,
    PolicyOutput,
    backward,
    forward,
    forward_batch,
    init_params,
    load_params,
    sample_action,
    save_params,
)
from .pngio import load_png, save_png
from .rollout import (
    RolloutConfig,
    StrokeLogEntry,
    format_stroke_log,
    paint,
    paint_multiscale,
    parse_stroke_log,
    replay_stroke_log,
)
from .trainer import (
    Adam,
    TrainConfig,
    Trajectory,
    Transition,
    collect_trajectory,
    compute_advantages,
    curriculum_horizon,
    eval_policy,
    ppo_update,
    schedule_thresh,
    select_reference,
    train,
)

__version__ = "0.1.0"
