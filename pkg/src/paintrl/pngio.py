"""PNG reading and writing for [0,1] float canvases.

Decoding divides 8-bit values by 255 exactly; encoding rounds half-up.
Only 8-bit RGB (or grayscale, widened to RGB) is accepted; images with an
alpha channel are rejected.
"""

import numpy as np
from PIL import Image

__all__ = ["load_png", "save_png"]

_ALPHA_MODES = {"RGBA", "LA", "PA"}


def load_png(path) -> np.ndarray:
    """Read a PNG as an HxWx3 float array with intensities in [0, 1]."""
    with Image.open(path) as img:
        if img.mode in _ALPHA_MODES or "transparency" in img.info:
            raise ValueError(
                f"{path}: alpha channels are not supported (mode {img.mode})"
            )
        if img.mode != "RGB":
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.uint8)
    return arr.astype(np.float64) / 255.0


def save_png(img: np.ndarray, path) -> None:
    """Write an HxWx3 float array in [0, 1] as an 8-bit RGB PNG."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 array, got shape {img.shape}")
    scaled = np.clip(img, 0.0, 1.0) * 255.0
    quantized = np.floor(scaled + 0.5).astype(np.uint8)  # round half-up
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")
