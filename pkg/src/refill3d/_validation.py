"""Input validation helpers.

Every public entry point funnels its arrays through these so that the
numerical code can assume float64 ``(H, W, C)`` images, boolean ``(H, W)``
masks and strictly positive float64 ``(H, W)`` depth maps.
"""

import numpy as np

from .errors import DimensionMismatchError, InvalidDepthError


def check_image(img, name="image"):
    """Return ``img`` as a float64 array of shape (H, W, C) with C in {1, 3}."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have shape (H, W), (H, W, 1) or (H, W, 3); got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_mask(mask, name="mask"):
    """Return ``mask`` as a boolean (H, W) array; True means 1 (known / valid)."""
    arr = np.asarray(mask)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D; got shape {arr.shape}")
    if arr.dtype == bool:
        return arr
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(bool)


def check_depth(depth, name="depth"):
    arr = np.asarray(depth, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D; got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDepthError(f"{name} contains non-finite values")
    if np.any(arr <= 0):
        raise InvalidDepthError(f"{name} contains non-positive values")
    return arr


def check_same_shape(**arrays):
    """Raise DimensionMismatchError unless all arrays share (H, W)."""
    shapes = {name: tuple(np.shape(a)[:2]) for name, a in arrays.items()}
    if len(set(shapes.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in shapes.items())
        raise DimensionMismatchError(f"spatial dimensions differ: {detail}")
    return next(iter(shapes.values()))


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite; got {value}")
    return value
