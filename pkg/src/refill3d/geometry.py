"""Pinhole camera model and the target-to-reference reprojection chain.

A target pixel ``(u, v)`` with depth ``z`` is lifted to a 3D point in the
target camera frame, moved into the reference camera frame by a rigid
transform, and projected back onto the reference image plane.

Pixel centers sit on integer coordinates; the image domain is
``[0, W-1] x [0, H-1]``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_depth, check_positive
from .errors import BehindCameraError, DimensionMismatchError, InvalidDepthError

#: Points with camera-frame depth at or below this are treated as behind the camera.
EPS_Z = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy"):
            check_positive(getattr(self, name), name)
        for name in ("cx", "cy"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def downscaled(self, factor=2):
        """Intrinsics for an image box-filtered by an integer ``factor``.

        A coarse pixel ``i`` covers fine pixels ``factor*i .. factor*i + factor-1``,
        so its center sits at ``(u + 0.5) / factor - 0.5`` in coarse units.
        """
        return Intrinsics(
            self.fx / factor,
            self.fy / factor,
            (self.cx + 0.5) / factor - 0.5,
            (self.cy + 0.5) / factor - 0.5,
        )

    def to_dict(self):
        return {"fx": float(self.fx), "fy": float(self.fy), "cx": float(self.cx), "cy": float(self.cy)}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))


def default_intrinsics(width, height, focal=750.0):
    """Square-pixel intrinsics with the principal point at the image center."""
    width = check_positive(width, "width")
    height = check_positive(height, "height")
    focal = check_positive(focal, "focal")
    return Intrinsics(focal, focal, width / 2.0, height / 2.0)


def euler_to_rotation(euler_xyz):
    """Rotation matrix ``Rz(gamma) @ Ry(beta) @ Rx(alpha)`` about fixed camera axes."""
    a, b, g = (float(x) for x in euler_xyz)
    return _rz(g) @ _ry(b) @ _rx(a)


def rotation_to_euler(R):
    """Inverse of :func:`euler_to_rotation` (beta restricted to [-pi/2, pi/2])."""
    R = np.asarray(R, dtype=np.float64)
    sb = -R[2, 0]
    sb = min(1.0, max(-1.0, sb))
    beta = np.arcsin(sb)
    if abs(sb) < 1.0 - 1e-12:
        alpha = np.arctan2(R[2, 1], R[2, 2])
        gamma = np.arctan2(R[1, 0], R[0, 0])
    else:
        # gimbal lock: only alpha -/+ gamma is observable, put it all in alpha
        gamma = 0.0
        alpha = np.arctan2(-R[1, 2], R[1, 1])
    return float(alpha), float(beta), float(gamma)


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(g):
    c, s = np.cos(g), np.sin(g)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(g):
    c, s = np.cos(g), np.sin(g)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def rotation_derivatives(euler_xyz):
    """Partial derivatives of :func:`euler_to_rotation` w.r.t. (alpha, beta, gamma)."""
    a, b, g = (float(x) for x in euler_xyz)
    rx, ry, rz = _rx(a), _ry(b), _rz(g)
    return (rz @ ry @ _drx(a), rz @ _dry(b) @ rx, _drz(g) @ ry @ rx)


def _wrap_angle(a):
    return float((a + np.pi) % (2.0 * np.pi) - np.pi)


def _canonical_euler(e):
    """Wrap angles into (-pi, pi), switching to the twin triple when one lands on -pi."""
    e = [_wrap_angle(a) for a in e]
    if any(a <= -np.pi for a in e):
        # (a, b, g) and (a + pi, pi - b, g + pi) give the same rotation
        e = [_wrap_angle(e[0] + np.pi), _wrap_angle(np.pi - e[1]), _wrap_angle(e[2] + np.pi)]
    return tuple(e)


@dataclass(frozen=True)
class Pose6D:
    """Rigid transform ``p -> R(euler_xyz) @ p + translation``; angles in radians."""

    euler_xyz: tuple = (0.0, 0.0, 0.0)
    translation: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        e = tuple(float(x) for x in self.euler_xyz)
        t = tuple(float(x) for x in self.translation)
        if len(e) != 3 or len(t) != 3:
            raise ValueError("euler_xyz and translation need three components each")
        if not all(np.isfinite(e + t)):
            raise ValueError("pose components must be finite")
        if any(abs(x) >= np.pi for x in e):
            raise ValueError(f"Euler angles must lie in (-pi, pi); got {e}")
        object.__setattr__(self, "euler_xyz", e)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_vector(cls, x):
        """Build from ``(alpha, beta, gamma, tx, ty, tz)``; angles are wrapped into (-pi, pi)."""
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape != (6,):
            raise ValueError("pose vector must have 6 entries")
        return cls(_canonical_euler(x[:3]), tuple(x[3:]))

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=np.float64)
        return cls(_canonical_euler(rotation_to_euler(T[:3, :3])), tuple(T[:3, 3]))

    def as_vector(self):
        return np.array(self.euler_xyz + self.translation)

    @property
    def rotation(self):
        return euler_to_rotation(self.euler_xyz)

    @property
    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self):
        R = self.rotation
        T = np.eye(4)
        T[:3, :3] = R.T
        T[:3, 3] = -R.T @ np.asarray(self.translation)
        return Pose6D.from_matrix(T)

    def compose(self, other):
        """Pose equivalent to applying ``other`` first, then ``self``."""
        return Pose6D.from_matrix(self.matrix @ other.matrix)

    def to_dict(self):
        return {"euler_xyz": list(self.euler_xyz), "translation": list(self.translation)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["euler_xyz"]), tuple(d["translation"]))


@dataclass(frozen=True)
class PixelFlow:
    """Where each target pixel lands in the reference image.

    ``coords[..., 0]`` is u (column) and ``coords[..., 1]`` is v (row).
    """

    coords: np.ndarray
    depths_ref: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.valid.shape


def backproject(u, v, z, k):
    """Lift pixel(s) with depth ``z`` to camera-frame 3D point(s), shape (..., 3)."""
    u, v, z = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (u, v, z)))
    if np.any(~np.isfinite(z)) or np.any(z <= 0):
        raise InvalidDepthError("back-projection requires positive, finite depth")
    return np.stack([z * (u - k.cx) / k.fx, z * (v - k.cy) / k.fy, z], axis=-1)


def transform_point(p, pose):
    """Apply ``R @ p + t`` to point(s) of shape (..., 3)."""
    p = np.asarray(p, dtype=np.float64)
    return p @ pose.rotation.T + np.asarray(pose.translation)


def project(p, k):
    """Project camera-frame point(s) to ``(u, v, z)``.

    Raises BehindCameraError when any point has ``z <= EPS_Z``.
    """
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    if np.any(z <= EPS_Z):
        raise BehindCameraError("point at or behind the camera plane")
    return k.fx * x / z + k.cx, k.fy * y / z + k.cy, z


def pixel_grid(height, width):
    """Integer pixel coordinates ``(u, v)`` as float64 arrays of shape (H, W)."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return u, v


def in_bounds(u, v, height, width):
    return (u >= 0) & (u <= width - 1) & (v >= 0) & (v <= height - 1)


def _snap(x, edge, tol=1e-9):
    return np.where(np.abs(x - edge) < tol, edge, x)


def reproject_grid(depth_t, pose, k, size=None):
    """Map every target pixel into reference-image coordinates.

    Pixels that land behind the reference camera or outside the image are
    marked invalid; their coordinates are still reported (NaN when behind).
    """
    depth_t = check_depth(depth_t, "depth_t")
    H, W = depth_t.shape
    if size is not None and tuple(size) != (H, W):
        raise DimensionMismatchError(f"depth map is {(H, W)}, requested grid is {tuple(size)}")
    u, v = pixel_grid(H, W)
    p = backproject(u, v, depth_t, k)
    q = transform_point(p, pose)
    z = q[..., 2]
    front = z > EPS_Z
    safe_z = np.where(front, z, 1.0)
    ur = np.where(front, k.fx * q[..., 0] / safe_z + k.cx, np.nan)
    vr = np.where(front, k.fy * q[..., 1] / safe_z + k.cy, np.nan)
    # round-off must not push a pixel that maps onto the border out of bounds
    ur = _snap(_snap(ur, 0.0), W - 1.0)
    vr = _snap(_snap(vr, 0.0), H - 1.0)
    valid = front & in_bounds(ur, vr, H, W)
    return PixelFlow(np.stack([ur, vr], axis=-1), z, valid)
