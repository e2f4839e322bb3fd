"""Simulated stroke-painting environment.

A canvas is an H x W x 3 float array of intensities in [0, 1]. The agent
issues 6-component actions in [0, 1]^6 that decode to a straight stroke
segment (angle, length, width, color); the pen advances from its current
position, the segment is rasterized as a capsule onto the canvas, and the
step reward is the normalized decrease of the distance to a reference image.

The environment is fully deterministic: identical (state, action, config)
inputs produce bit-identical results.
"""

import math
from dataclasses import dataclass

import numpy as np

from .losses import LossKind, loss_perceptual, default_feature_stack, pixel_loss_sum

__all__ = [
    "Action",
    "EnvConfig",
    "PaintEnv",
    "StrokeParams",
    "advance_pen",
    "clamp_pen",
    "decode_action",
    "extract_patches",
    "new_canvas",
    "render_segment",
    "stamp_segment",
]

TAU = 2.0 * math.pi

# A raw action is a float array [a_angle, a_len, a_width, a_r, a_g, a_b],
# every component in [0, 1].
Action = np.ndarray


@dataclass(frozen=True)
class EnvConfig:
    """Environment constants: stroke limits, blending, observation window."""

    l_max: float = 16.0   # longest stroke segment, pixels
    w_max: float = 4.0    # widest stroke, pixels
    w_eps: float = 0.5    # widths below this paint nothing (pen-up move)
    beta: float = 1.0     # fraction of stroke color blended into the canvas
    h_o: int = 41         # observation patch height (odd)
    w_o: int = 41         # observation patch width (odd)
    pad_value: float = 1.0  # intensity used outside canvas bounds

    def __post_init__(self):
        if self.l_max <= 0 or self.w_max <= 0:
            raise ValueError("l_max and w_max must be positive")
        if not 0 <= self.w_eps < self.w_max:
            raise ValueError("w_eps must satisfy 0 <= w_eps < w_max")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must be in [0, 1]")
        if self.h_o % 2 == 0 or self.w_o % 2 == 0 or self.h_o < 1 or self.w_o < 1:
            raise ValueError("h_o and w_o must be odd and positive")
        if not 0 <= self.pad_value <= 1:
            raise ValueError("pad_value must be in [0, 1]")


@dataclass(frozen=True)
class StrokeParams:
    """Decoded stroke: angle in [0, 2pi), length/width in pixels, RGB color."""

    angle: float
    length: float
    width: float
    color: tuple

    @property
    def paints(self) -> bool:
        return self.width > 0


def new_canvas(height: int, width: int, fill=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Fresh canvas of the given size with every pixel set to `fill`."""
    if height < 1 or width < 1:
        raise ValueError(f"canvas dimensions must be >= 1, got {height}x{width}")
    fill = np.asarray(fill, dtype=np.float64)
    if fill.shape != (3,) or np.any(fill < 0) or np.any(fill > 1):
        raise ValueError(f"fill must be an RGB triple in [0,1], got {fill}")
    canvas = np.empty((height, width, 3), dtype=np.float64)
    canvas[:] = fill
    return canvas


def decode_action(a: Action, cfg: EnvConfig) -> StrokeParams:
    """Map a raw [0,1]^6 action to stroke parameters.

    Each component scales linearly: angle over [0, 2pi) (1.0 wraps to 0),
    length over [0, l_max], width over [0, w_max], color passes through.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (6,):
        raise ValueError(f"action must have 6 components, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        raise ValueError(f"action components must be finite and in [0,1], got {a}")
    return StrokeParams(
        angle=(TAU * float(a[0])) % TAU,
        length=float(a[1]) * cfg.l_max,
        width=float(a[2]) * cfg.w_max,
        color=(float(a[3]), float(a[4]), float(a[5])),
    )


def advance_pen(pen, angle: float, length: float):
    """New pen position: x advances by l*sin(angle), y by l*cos(angle).

    y is the row axis and increases downward; no clamping happens here.
    """
    x, y = pen
    return (x + length * math.sin(angle), y + length * math.cos(angle))


def clamp_pen(pen, height: int, width: int):
    """Pen position restricted to the canvas: x in [0, W-1], y in [0, H-1]."""
    x, y = pen
    return (min(max(x, 0.0), width - 1.0), min(max(y, 0.0), height - 1.0))


def _capsule_roi(height, width, p0, p1, radius):
    """Bounding box and coverage mask of the capsule around segment p0-p1.

    Returns (r0, r1, c0, c1, mask) where mask flags pixels of the box whose
    center lies within `radius` of the segment, or None if the box is empty.
    """
    x0, y0 = p0
    x1, y1 = p1
    r0 = max(0, math.floor(min(y0, y1) - radius))
    r1 = min(height - 1, math.ceil(max(y0, y1) + radius))
    c0 = max(0, math.floor(min(x0, x1) - radius))
    c1 = min(width - 1, math.ceil(max(x0, x1) + radius))
    if r0 > r1 or c0 > c1:
        return None
    ys, xs = np.meshgrid(
        np.arange(r0, r1 + 1, dtype=np.float64),
        np.arange(c0, c1 + 1, dtype=np.float64),
        indexing="ij",
    )
    vx, vy = x1 - x0, y1 - y0
    seg_len2 = vx * vx + vy * vy
    if seg_len2 == 0.0:
        dx, dy = xs - x0, ys - y0
    else:
        t = np.clip(((xs - x0) * vx + (ys - y0) * vy) / seg_len2, 0.0, 1.0)
        dx, dy = xs - (x0 + t * vx), ys - (y0 + t * vy)
    mask = dx * dx + dy * dy <= radius * radius
    if not mask.any():
        return None
    return r0, r1, c0, c1, mask


def _blend_into(canvas, roi, color, beta):
    """Blend `color` into the masked pixels: new = beta*color + (1-beta)*old."""
    r0, r1, c0, c1, mask = roi
    patch = canvas[r0 : r1 + 1, c0 : c1 + 1]
    color = np.asarray(color, dtype=np.float64)
    patch[mask] = np.clip(beta * color + (1.0 - beta) * patch[mask], 0.0, 1.0)


def stamp_segment(canvas: np.ndarray, start, end, width: float, color,
                  beta: float, w_eps: float = 0.0) -> None:
    """In-place version of `render_segment`; identical coverage and blending."""
    if width < 0:
        raise ValueError(f"width must be >= 0, got {width}")
    if width <= 0 or width < w_eps:
        return
    roi = _capsule_roi(canvas.shape[0], canvas.shape[1], start, end, width / 2.0)
    if roi is not None:
        _blend_into(canvas, roi, color, beta)


def render_segment(
    canvas: np.ndarray,
    start,
    end,
    width: float,
    color,
    beta: float,
    w_eps: float = 0.0,
) -> np.ndarray:
    """Rasterize one capsule-shaped segment onto a copy of the canvas.

    A pixel is covered when its center lies within width/2 of the segment
    from `start` to `end` (positions are (x, y) pairs). Covered pixels blend
    as new = beta*color + (1-beta)*old; widths below `w_eps` (or zero) leave
    the canvas untouched.
    """
    out = canvas.copy()
    stamp_segment(out, start, end, width, color, beta, w_eps)
    return out


def extract_patches(canvas: np.ndarray, reference: np.ndarray, pen, cfg: EnvConfig) -> np.ndarray:
    """Egocentric observation: canvas and reference patches around the pen.

    Both patches are h_o x w_o crops centered on the pen position rounded
    half-up to a pixel, concatenated along width (canvas first) into an
    h_o x 2*w_o x 3 array. Pixels outside the canvas read as pad_value.
    """
    height, width = canvas.shape[0], canvas.shape[1]
    cx = int(math.floor(pen[0] + 0.5))
    cy = int(math.floor(pen[1] + 0.5))
    hh, hw = cfg.h_o // 2, cfg.w_o // 2
    obs = np.full((cfg.h_o, 2 * cfg.w_o, 3), cfg.pad_value, dtype=np.float64)

    src_r0, src_r1 = max(0, cy - hh), min(height - 1, cy + hh)
    src_c0, src_c1 = max(0, cx - hw), min(width - 1, cx + hw)
    if src_r0 > src_r1 or src_c0 > src_c1:
        return obs
    dst_r0 = src_r0 - (cy - hh)
    dst_c0 = src_c0 - (cx - hw)
    rows = slice(dst_r0, dst_r0 + (src_r1 - src_r0 + 1))
    cols = slice(dst_c0, dst_c0 + (src_c1 - src_c0 + 1))
    src = (slice(src_r0, src_r1 + 1), slice(src_c0, src_c1 + 1))
    obs[rows, cols] = canvas[src]
    obs[rows, slice(cols.start + cfg.w_o, cols.stop + cfg.w_o)] = reference[src]
    return obs


def _validate_image(img, name):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"{name} must be an HxWx3 array, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise ValueError(f"{name} intensities must lie in [0, 1]")
    return img


class PaintEnv:
    """Stateful painting episode against a fixed reference image.

    Attributes mirror the episode state: `canvas` (mutated in place by
    `step`), `reference` (immutable within the episode), `pen` as an (x, y)
    pair, `step_count`, and the scalars `initial_loss` / `prev_loss` that
    drive the normalized reward. For "l2"/"lhalf" the running loss is
    maintained incrementally from the repainted region, so a step costs
    O(segment area + observation), independent of canvas size.
    """

    def __init__(self, reference, cfg: EnvConfig | None = None,
                 loss: LossKind | None = None, init_canvas=None, init_pen=None):
        self.cfg = cfg if cfg is not None else EnvConfig()
        self.loss_kind = loss if loss is not None else LossKind()
        self.reset(reference, init_canvas=init_canvas, init_pen=init_pen)

    @property
    def height(self) -> int:
        return self.reference.shape[0]

    @property
    def width(self) -> int:
        return self.reference.shape[1]

    def reset(self, reference=None, init_canvas=None, init_pen=None) -> np.ndarray:
        """Start a new episode; returns the initial observation.

        Defaults: an all-white canvas and the pen at the canvas center.
        """
        if reference is not None:
            self.reference = _validate_image(reference, "reference")
            self._ref_eff = self.loss_kind.prepare_reference(self.reference)
        if init_canvas is None:
            self.canvas = new_canvas(self.height, self.width)
        else:
            init_canvas = _validate_image(init_canvas, "init_canvas")
            if init_canvas.shape != self.reference.shape:
                raise ValueError(
                    f"init_canvas shape {init_canvas.shape} does not match "
                    f"reference shape {self.reference.shape}"
                )
            self.canvas = init_canvas.copy()
        if init_pen is None:
            self.pen = ((self.width - 1) / 2.0, (self.height - 1) / 2.0)
        else:
            self.pen = clamp_pen((float(init_pen[0]), float(init_pen[1])),
                                  self.height, self.width)
        self.step_count = 0
        if self.loss_kind.kind == "perceptual":
            self._loss_sum = None
        else:
            self._loss_sum = pixel_loss_sum(self.canvas, self._ref_eff, self.loss_kind.kind)
        self.initial_loss = self._current_loss()
        self.prev_loss = self.initial_loss
        return self.observe()

    def _current_loss(self) -> float:
        if self._loss_sum is not None:
            return self._loss_sum / self.canvas.size
        stack = self.loss_kind.features or default_feature_stack()
        return loss_perceptual(self.canvas, self._ref_eff, stack)

    def observe(self, reference=None) -> np.ndarray:
        """Egocentric observation; `reference` may substitute the goal image
        (used to feed the policy a blurred goal while rewards stay exact)."""
        ref = self.reference if reference is None else reference
        return extract_patches(self.canvas, ref, self.pen, self.cfg)

    def step(self, action: Action):
        """Decode, move the pen (clamped to bounds), paint, and score.

        Returns (reward, observation). The reward is the decrease of the
        canvas-to-reference loss relative to the episode's initial loss;
        an episode that starts already solved (initial loss 0) yields 0.
        """
        stroke = decode_action(action, self.cfg)
        old_pen = self.pen
        self.pen = clamp_pen(
            advance_pen(old_pen, stroke.angle, stroke.length), self.height, self.width
        )
        self._paint_segment(old_pen, self.pen, stroke)
        loss = self._current_loss()
        if self.initial_loss == 0.0:
            reward = 0.0
        else:
            reward = (self.prev_loss - loss) / self.initial_loss
        self.prev_loss = loss
        self.step_count += 1
        return reward, self.observe()

    def _paint_segment(self, start, end, stroke: StrokeParams):
        if stroke.width <= 0 or stroke.width < self.cfg.w_eps:
            return
        roi = _capsule_roi(self.height, self.width, start, end, stroke.width / 2.0)
        if roi is None:
            return
        if self._loss_sum is not None:
            r0, r1, c0, c1, mask = roi
            box = (slice(r0, r1 + 1), slice(c0, c1 + 1))
            ref_px = self._ref_eff[box][mask]
            before = pixel_loss_sum(self.canvas[box][mask], ref_px, self.loss_kind.kind)
            _blend_into(self.canvas, roi, stroke.color, self.cfg.beta)
            after = pixel_loss_sum(self.canvas[box][mask], ref_px, self.loss_kind.kind)
            self._loss_sum += after - before
        else:
            _blend_into(self.canvas, roi, stroke.color, self.cfg.beta)

    def recompute_loss(self) -> float:
        """Loss evaluated from scratch; also resyncs the incremental sum."""
        if self._loss_sum is not None:
            self._loss_sum = pixel_loss_sum(self.canvas, self._ref_eff, self.loss_kind.kind)
        loss = self._current_loss()
        self.prev_loss = loss
        return loss
