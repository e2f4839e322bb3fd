"""Image distance functions and the normalized per-step reward.

All images are H x W x C float arrays with intensities in [0, 1]. Three
distances are provided: plain mean squared error, a square-root penalty that
rewards exact color matches over average colors, and a feature-space distance
computed on a fixed randomly-initialized convolution stack.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import correlate1d

__all__ = [
    "FeatureStack",
    "LossKind",
    "default_feature_stack",
    "gaussian_blur",
    "loss_l2",
    "loss_lhalf",
    "loss_perceptual",
    "normalized_reward",
    "pixel_loss_sum",
]


def _check_same_shape(img, ref):
    if img.shape != ref.shape:
        raise ValueError(f"image shapes differ: {img.shape} vs {ref.shape}")


def loss_l2(img: np.ndarray, ref: np.ndarray) -> float:
    """Mean squared difference over all pixels and channels."""
    _check_same_shape(img, ref)
    d = np.asarray(img, dtype=np.float64) - np.asarray(ref, dtype=np.float64)
    return float(np.mean(d * d))


def loss_lhalf(img: np.ndarray, ref: np.ndarray) -> float:
    """Mean of |difference|^(1/2); punishes average-color compromises."""
    _check_same_shape(img, ref)
    d = np.abs(np.asarray(img, dtype=np.float64) - np.asarray(ref, dtype=np.float64))
    return float(np.mean(np.sqrt(d)))


def pixel_loss_sum(img: np.ndarray, ref: np.ndarray, kind: str) -> float:
    """Sum (not mean) of per-element loss contributions for "l2" or "lhalf".

    Used for incremental loss maintenance over small regions: the full-image
    loss is the sum over all elements divided by the element count.
    """
    _check_same_shape(img, ref)
    d = np.asarray(img, dtype=np.float64) - np.asarray(ref, dtype=np.float64)
    if kind == "l2":
        return float(np.sum(d * d))
    if kind == "lhalf":
        return float(np.sum(np.sqrt(np.abs(d))))
    raise ValueError(f"no per-pixel decomposition for loss kind {kind!r}")


def _conv_valid(img: np.ndarray, weights: np.ndarray, stride: int) -> np.ndarray:
    """Valid (no padding) strided 2-D convolution; img (H,W,C), weights (O,kh,kw,C)."""
    kh, kw = weights.shape[1], weights.shape[2]
    if img.shape[0] < kh or img.shape[1] < kw:
        raise ValueError(
            f"input {img.shape[:2]} smaller than kernel {(kh, kw)}"
        )
    win = sliding_window_view(img, (kh, kw), axis=(0, 1))[::stride, ::stride]
    # win: (oh, ow, C, kh, kw); weights: (O, kh, kw, C)
    return np.einsum("xyckl,oklc->xyo", win, weights, optimize=True)


@dataclass(frozen=True)
class FeatureStack:
    """Fixed convolutional feature extractor for the perceptual distance.

    Each layer is a valid strided convolution with frozen weights followed by
    a rectifier. Weights come entirely from `seed`, so the distance is
    reproducible across runs without any pretrained model.
    """

    weights: tuple  # per layer: (out_ch, kh, kw, in_ch) float64
    strides: tuple  # per layer: int
    seed: int = 0

    @classmethod
    def from_seed(
        cls,
        seed: int = 0,
        n_layers: int = 3,
        channels: int = 16,
        kernel: int = 3,
        stride: int = 2,
        in_channels: int = 3,
    ) -> "FeatureStack":
        rng = np.random.default_rng(seed)
        weights = []
        c_in = in_channels
        for _ in range(n_layers):
            fan_in = kernel * kernel * c_in
            bound = 1.0 / math.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(channels, kernel, kernel, c_in))
            weights.append(w)
            c_in = channels
        return cls(weights=tuple(weights), strides=(stride,) * n_layers, seed=seed)

    @classmethod
    def identity(cls, channels: int = 3) -> "FeatureStack":
        """Single 1x1 convolution passing each channel through unchanged."""
        w = np.zeros((channels, 1, 1, channels))
        for c in range(channels):
            w[c, 0, 0, c] = 1.0
        return cls(weights=(w,), strides=(1,), seed=-1)

    def feature_maps(self, img: np.ndarray) -> list:
        """Post-rectifier feature map of every layer, shallowest first."""
        x = np.asarray(img, dtype=np.float64)
        maps = []
        for w, s in zip(self.weights, self.strides):
            x = np.maximum(_conv_valid(x, w, s), 0.0)
            maps.append(x)
        return maps


_DEFAULT_STACK = None


def default_feature_stack() -> FeatureStack:
    """Shared seed-0 stack used when no explicit one is configured."""
    global _DEFAULT_STACK
    if _DEFAULT_STACK is None:
        _DEFAULT_STACK = FeatureStack.from_seed(0)
    return _DEFAULT_STACK


def loss_perceptual(img: np.ndarray, ref: np.ndarray, stack: FeatureStack) -> float:
    """Sum over layers of the size-normalized squared feature-map distance."""
    _check_same_shape(img, ref)
    total = 0.0
    for fa, fb in zip(stack.feature_maps(img), stack.feature_maps(ref)):
        d = fa - fb
        total += float(np.sum(d * d)) / d.size
    return total


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Per-channel Gaussian low-pass filter with reflect padding.

    Kernel radius is ceil(3*sigma); sigma = 0 returns an unchanged copy.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return img.copy()
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    out = correlate1d(img, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def normalized_reward(loss_prev: float, loss_cur: float, loss_initial: float) -> float:
    """Per-step loss decrease divided by the episode's initial loss.

    Bounded above by 1 in cumulative form: the rewards of an episode
    telescope to (L_0 - L_t) / L_0 <= 1.
    """
    if loss_initial <= 0:
        raise ValueError(f"initial loss must be positive, got {loss_initial}")
    return (loss_prev - loss_cur) / loss_initial


@dataclass(frozen=True)
class LossKind:
    """Selected image distance plus an optional reference blur.

    `kind` is one of "l2", "lhalf" or "perceptual". When `blur_sigma` > 0 the
    reference is low-passed before the distance is evaluated (the canvas is
    never blurred). Perceptual distance uses `features`, falling back to the
    shared seed-0 stack.
    """

    kind: str = "l2"
    blur_sigma: float = 0.0
    features: FeatureStack | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("l2", "lhalf", "perceptual"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")

    def prepare_reference(self, ref: np.ndarray) -> np.ndarray:
        """Reference image as actually compared against (blurred if configured)."""
        if self.blur_sigma > 0:
            return gaussian_blur(ref, self.blur_sigma)
        return np.asarray(ref, dtype=np.float64)

    def evaluate(self, img: np.ndarray, ref: np.ndarray) -> float:
        ref = self.prepare_reference(ref)
        if self.kind == "l2":
            return loss_l2(img, ref)
        if self.kind == "lhalf":
            return loss_lhalf(img, ref)
        stack = self.features if self.features is not None else default_feature_stack()
        return loss_perceptual(img, ref, stack)
