"""Run-time painting: stroke-by-stroke rollout and coarse-to-fine refinement.

Painting repeatedly drops the pen at a random spot and lets the policy lay
down segments (always its mean action) while the value head predicts further
improvement; strokes stop when the prediction falls to the configured floor,
and the whole run stops once the canvas is close enough to the reference or
a hard stroke budget is spent. The multi-scale variant repeats this from a
coarse reference upward, each scale painting over the upsampled previous
canvas.
"""

import math
from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, PaintEnv, advance_pen, clamp_pen, decode_action, new_canvas, stamp_segment
from .imageops import downsample_area, resize_bilinear, scaled_size
from .losses import LossKind
from .net import NetworkParams, forward

__all__ = [
    "RolloutConfig",
    "StrokeLogEntry",
    "format_stroke_log",
    "paint",
    "paint_multiscale",
    "parse_stroke_log",
    "replay_stroke_log",
]

STROKE_LOG_HEADER = "stroke,segment,x,y,angle,length,width,r,g,b"


@dataclass(frozen=True)
class RolloutConfig:
    """Termination rules and pyramid for run-time painting."""

    thresh_sim: float = 0.005        # stop once loss(canvas, reference) <= this
    value_stop: float = 0.0          # end a stroke when predicted value <= this
    max_strokes_total: int = 500     # hard cap of outer iterations
    max_segments_per_stroke: int = 8
    scales: tuple = (1.0,)           # strictly increasing, last must be 1.0
    seed: int = 0

    def __post_init__(self):
        if self.thresh_sim < 0:
            raise ValueError("thresh_sim must be >= 0")
        if self.max_strokes_total < 1 or self.max_segments_per_stroke < 1:
            raise ValueError("stroke and segment caps must be >= 1")
        scales = tuple(float(s) for s in self.scales)
        if not scales or scales[-1] != 1.0:
            raise ValueError("scales must end at 1.0 (native resolution)")
        if any(b <= a for a, b in zip(scales, scales[1:])) or scales[0] <= 0:
            raise ValueError(f"scales must be positive and strictly increasing, got {scales}")
        object.__setattr__(self, "scales", scales)


@dataclass(frozen=True)
class StrokeLogEntry:
    """One executed segment: start position plus decoded stroke parameters."""

    stroke: int
    segment: int
    x: float
    y: float
    angle: float
    length: float
    width: float
    color: tuple


def paint(reference, params: NetworkParams, cfg: RolloutConfig,
          env_cfg: EnvConfig, loss: LossKind, init_canvas=None, rng=None):
    """Paint `reference` with the trained policy; returns (canvas, stroke log).

    Stroke start positions come from the seeded generator, everything else
    is the deterministic policy mean, so identical inputs repaint the same
    canvas. The caps guarantee termination for any value function.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    env = PaintEnv(reference, env_cfg, loss, init_canvas=init_canvas)
    log = []
    strokes = 0
    while env.prev_loss > cfg.thresh_sim and strokes < cfg.max_strokes_total:
        env.pen = (float(rng.uniform(0, env.width - 1)),
                   float(rng.uniform(0, env.height - 1)))
        for segment in range(cfg.max_segments_per_stroke):
            out = forward(params, env.observe())
            if out.value <= cfg.value_stop:
                break
            action = np.clip(out.mean, 0.0, 1.0)
            stroke = decode_action(action, env_cfg)
            start = env.pen
            env.step(action)
            log.append(StrokeLogEntry(
                stroke=strokes, segment=segment, x=start[0], y=start[1],
                angle=stroke.angle, length=stroke.length, width=stroke.width,
                color=stroke.color,
            ))
        strokes += 1
    return env.canvas.copy(), log


def paint_multiscale(reference, params: NetworkParams, cfg: RolloutConfig,
                     env_cfg: EnvConfig, loss: LossKind):
    """Coarse-to-fine painting over cfg.scales; returns (canvas, stroke log).

    The reference is area-downsampled to each scale; the first scale paints
    on a blank canvas and each later scale paints over the bilinearly
    upsampled canvas of the previous one. Logged stroke positions are in the
    pixel coordinates of their own scale.
    """
    reference = np.asarray(reference, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    canvas = None
    log = []
    for scale in cfg.scales:
        h, w = scaled_size(reference.shape[0], reference.shape[1], scale)
        ref_s = downsample_area(reference, h, w) if scale < 1.0 else reference
        init = None
        if canvas is not None:
            init = np.clip(resize_bilinear(canvas, h, w), 0.0, 1.0)
        canvas, scale_log = paint(ref_s, params, cfg, env_cfg, loss,
                                  init_canvas=init, rng=rng)
        log.extend(scale_log)
    return canvas, log


def replay_stroke_log(log, height: int, width: int, env_cfg: EnvConfig,
                      init_canvas=None) -> np.ndarray:
    """Re-render logged segments; bit-identical to the original single-scale
    paint run when started from the same (default: blank) canvas."""
    canvas = new_canvas(height, width) if init_canvas is None else init_canvas.copy()
    for e in log:
        start = (e.x, e.y)
        end = clamp_pen(advance_pen(start, e.angle, e.length), height, width)
        stamp_segment(canvas, start, end, e.width, e.color,
                      env_cfg.beta, env_cfg.w_eps)
    return canvas


def format_stroke_log(log) -> str:
    """Comma-separated rows: stroke, segment, x, y, angle, length, width, r, g, b."""
    lines = [STROKE_LOG_HEADER]
    for e in log:
        lines.append(
            f"{e.stroke},{e.segment},{e.x!r},{e.y!r},{e.angle!r},"
            f"{e.length!r},{e.width!r},{e.color[0]!r},{e.color[1]!r},{e.color[2]!r}"
        )
    return "\n".join(lines) + "\n"


def parse_stroke_log(text: str):
    """Inverse of `format_stroke_log`; float fields round-trip exactly."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != STROKE_LOG_HEADER:
        raise ValueError("stroke log missing expected header")
    log = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 10:
            raise ValueError(f"stroke log row has {len(parts)} fields, expected 10")
        log.append(StrokeLogEntry(
            stroke=int(parts[0]), segment=int(parts[1]),
            x=float(parts[2]), y=float(parts[3]), angle=float(parts[4]),
            length=float(parts[5]), width=float(parts[6]),
            color=(float(parts[7]), float(parts[8]), float(parts[9])),
        ))
    return log
