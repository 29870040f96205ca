"""Mapping between 8-bit rasters and the [-1, 1] network domain."""
import numpy as np


def to_unit(img8):
    """uint8 (H, W, C) -> float64 in [-1, 1] via v/127.5 - 1."""
    return np.asarray(img8, dtype=np.float64) / 127.5 - 1.0


def to_uint8(img):
    """[-1, 1] -> uint8 via round((v+1)*127.5), clamped to [0, 255]."""
    v = np.rint((np.asarray(img, dtype=np.float64) + 1.0) * 127.5)
    return np.clip(v, 0, 255).astype(np.uint8)


def check_image(img):
    """Validate an (H, W, C) array in [-1, 1]; returns it as float64."""
    from ..errors import ShapeError

    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"expected (H, W, C) image, got shape {arr.shape}")
    if arr.size and (arr.min() < -1.0 or arr.max() > 1.0):
        raise ShapeError("pixel values must lie in [-1, 1]")
    return arr
