"""Deterministic resampling primitives shared by data prep and rollout."""

import math

import numpy as np

__all__ = ["downsample_area", "resize_bilinear", "scaled_size"]


def scaled_size(height: int, width: int, scale: float):
    """Target dimensions for a pyramid scale, rounded half-up, at least 1."""
    return (max(1, int(math.floor(height * scale + 0.5))),
            max(1, int(math.floor(width * scale + 0.5))))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel centers; identity when sizes match."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[0], img.shape[1]
    if (h, w) == (out_h, out_w):
        return img.copy()
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be >= 1, got {out_h}x{out_w}")

    def axis_coords(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis_coords(h, out_h)
    x0, x1, fx = axis_coords(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def _overlap_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) row-stochastic matrix of box-overlap averaging weights."""
    step = n_in / n_out
    starts = np.arange(n_out) * step
    ends = starts + step
    src = np.arange(n_in)
    overlap = np.minimum(ends[:, None], src[None, :] + 1.0) - np.maximum(
        starts[:, None], src[None, :]
    )
    weights = np.maximum(overlap, 0.0)
    return weights / weights.sum(axis=1, keepdims=True)


def downsample_area(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-average downsampling; exact box averaging for integer factors."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[0], img.shape[1]
    if out_h > h or out_w > w:
        raise ValueError(
            f"downsample target {out_h}x{out_w} exceeds source {h}x{w}"
        )
    if (h, w) == (out_h, out_w):
        return img.copy()
    wr = _overlap_weights(h, out_h)
    wc = _overlap_weights(w, out_w)
    return np.einsum("oh,hwc,pw->opc", wr, img, wc, optimize=True)
