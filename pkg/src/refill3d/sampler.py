"""Bilinear sampling, image warping and hole-mask dilation."""

import numpy as np
from scipy import ndimage

from ._validation import check_image, check_mask
from .errors import DimensionMismatchError, OutOfBoundsError
from .geometry import in_bounds


def _corners(n, x):
    """Left grid index and fractional offset, keeping ``i0 + 1`` inside the image."""
    if n == 1:
        return np.zeros(x.shape, dtype=np.intp), np.zeros_like(x)
    i0 = np.clip(np.floor(x).astype(np.intp), 0, n - 2)
    return i0, x - i0


def planes(img):
    """Channel-first copy of an (H, W, C) image, shaped (C, H*W)."""
    return np.ascontiguousarray(np.moveaxis(img, -1, 0)).reshape(img.shape[-1], -1)


def sample_planes(pl, shape, u, v, grad=False):
    """Bilinear lookup on a channel-first image ``pl`` (see :func:`planes`).

    ``u`` and ``v`` are 1-D and in bounds; results have shape (C, n). This
    layout keeps every elementwise operation on long contiguous rows.
    """
    H, W = shape
    i0, fu = _corners(W, u)
    j0, fv = _corners(H, v)
    di = np.minimum(i0 + 1, W - 1) - i0
    dj = (np.minimum(j0 + 1, H - 1) - j0) * W
    k00 = j0 * W + i0
    p00 = np.take(pl, k00, axis=1)
    p01 = np.take(pl, k00 + di, axis=1)
    p10 = np.take(pl, k00 + dj, axis=1)
    p11 = np.take(pl, k00 + dj + di, axis=1)
    # weight form (not p00 + fu * (p01 - p00)) so nodes come back bit-exact
    gu = 1.0 - fu
    top = gu * p00 + fu * p01
    bottom = gu * p10 + fu * p11
    val = (1.0 - fv) * top + fv * bottom
    if not grad:
        return val
    du = (1.0 - fv) * (p01 - p00) + fv * (p11 - p10)
    dv = bottom - top
    # On an interior grid line the interpolant has a kink; report the mean of
    # the two one-sided slopes so that descent directions are not biased.
    on_u = np.flatnonzero((fu == 0) & (i0 > 0))
    if on_u.size:
        k, kd, w = k00[on_u], dj[on_u], fv[on_u]
        left = (1.0 - w) * (pl[:, k] - pl[:, k - 1]) + w * (pl[:, k + kd] - pl[:, k + kd - 1])
        du[:, on_u] = 0.5 * (du[:, on_u] + left)
    on_v = np.flatnonzero((fv == 0) & (j0 > 0))
    if on_v.size:
        k, kd, w = k00[on_v], di[on_v], fu[on_v]
        up = (1.0 - w) * (pl[:, k] - pl[:, k - W]) + w * (pl[:, k + kd] - pl[:, k + kd - W])
        dv[:, on_v] = 0.5 * (dv[:, on_v] + up)
    return val, du, dv


def sample(img, u, v, grad=False):
    """Vectorized bilinear lookup at in-bounds coordinates.

    ``img`` is (H, W, C); ``u`` and ``v`` are equal-shape arrays. Returns
    values of shape ``u.shape + (C,)`` and, with ``grad=True``, the partial
    derivatives w.r.t. ``u`` and ``v`` of the interpolant. On an interior
    integer grid line, where the interpolant is not differentiable, the
    derivative across that line is the mean of the two one-sided slopes.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    out_shape = u.shape + (img.shape[-1],)
    res = sample_planes(planes(img), img.shape[:2], u.ravel(), v.ravel(), grad)
    if not grad:
        return res.T.reshape(out_shape)
    return tuple(a.T.reshape(out_shape) for a in res)


def _check_point(img, u, v):
    H, W = img.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not np.all(in_bounds(u, v, H, W)):
        raise OutOfBoundsError(f"sample point outside [0, {W - 1}] x [0, {H - 1}]")
    return u, v


def bilinear_sample(img, u, v):
    """Sample ``img`` at continuous pixel coordinates ``(u, v)``.

    Weights are ``(1-fu)(1-fv)``, ``fu(1-fv)``, ``(1-fu)fv`` and ``fu fv``
    for the four surrounding nodes. Grid nodes are reproduced exactly.

    Raises
    ------
    OutOfBoundsError
        If any coordinate lies outside ``[0, W-1] x [0, H-1]``.
    """
    img = check_image(img)
    u, v = _check_point(img, u, v)
    return sample(img, u, v)


def bilinear_sample_grad(img, u, v):
    """Value and partial derivatives ``(value, d/du, d/dv)`` of the bilinear interpolant."""
    img = check_image(img)
    u, v = _check_point(img, u, v)
    return sample(img, u, v, grad=True)


def warp_image(reference, flow):
    """Pull ``reference`` through ``flow``; invalid pixels become black.

    Returns the warped image and the validity mask (``flow.valid``).
    """
    reference = check_image(reference, "reference")
    if reference.shape[:2] != flow.shape:
        raise DimensionMismatchError(f"reference is {reference.shape[:2]}, flow is {flow.shape}")
    return warp_coords(reference, flow.coords[..., 0], flow.coords[..., 1], flow.valid)


def warp_coords(img, u, v, valid):
    out = np.zeros(valid.shape + (img.shape[2],))
    out[valid] = sample(img, u[valid], v[valid])
    return out, valid.copy()


def dilate_mask(m, radius):
    """Grow the zero (hole) region of ``m`` by a Euclidean disk of ``radius`` pixels.

    A pixel becomes 0 when some 0-pixel of ``m`` lies within distance
    ``radius`` of it. Radius 0 returns a copy of ``m``.
    """
    m = check_mask(m)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0 or m.all():
        return m.copy()
    if not m.any():
        return m.copy()
    # distance from every pixel to the nearest hole pixel
    dist = ndimage.distance_transform_edt(m)
    return dist > radius


def scaled_radius(height, width, base=15, base_size=512):
    """Dilation radius scaled from ``base`` pixels at a ``base_size`` square image."""
    return int(round(base * min(height, width) / base_size))
