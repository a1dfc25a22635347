"""Ray-cast two-view renders of textured planar scenes with exact depth and pose.

This module is the ground-truth oracle for the alignment stages, so it
deliberately avoids ``geometry.reproject_grid`` and ``sampler``: rays are
intersected with planes in closed form and shading is a smooth procedural
function of the 3D hit point.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Intrinsics, Pose6D, euler_to_rotation

FAR_DEPTH = 1e3

# wavelength (scene units) and amplitude of the three texture octaves
_OCTAVES = ((8.0, 0.15), (2.0, 0.1), (0.4, 0.06))


@dataclass(frozen=True)
class Plane:
    """Plane ``n . X = c`` in world coordinates; ``n`` is normalized on construction."""

    n: tuple
    c: float
    texture: int = 0
    scale: float = 1.0

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64)
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("plane normal must be non-zero")
        object.__setattr__(self, "n", tuple(n / norm))
        object.__setattr__(self, "c", float(self.c) / norm)
        if self.scale <= 0:
            raise ValueError("texture scale must be positive")

    def to_dict(self):
        return {"n": list(self.n), "c": self.c, "texture": int(self.texture), "scale": float(self.scale)}


@dataclass(frozen=True)
class PlaneScene:
    planes: tuple
    background: tuple = (0.5, 0.5, 0.5)

    def to_dict(self):
        return {"planes": [p.to_dict() for p in self.planes], "background": list(self.background)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        planes = tuple(Plane(tuple(p["n"]), p["c"], int(p.get("texture", 0)), float(p.get("scale", 1.0))) for p in d["planes"])
        return cls(planes, tuple(d.get("background", (0.5, 0.5, 0.5))))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class RenderedView:
    image: np.ndarray
    depth: np.ndarray
    pose_world_to_cam: Pose6D
    intrinsics: Intrinsics
    #: world-space hit point per pixel (H, W, 3)
    points: np.ndarray = field(repr=False, default=None)


def default_scene(texture_scale=1.0):
    """A closed box "room" around the origin; cameras inside never see occlusions.

    Every plane faces inward (interior is ``n . X <= c``), so the nearest
    forward intersection along any ray from inside is the visible surface.
    The back wall is slanted to give depth variation.
    """
    back_n = np.array([0.18, -0.12, 1.0])
    back_n /= np.linalg.norm(back_n)
    right_n = np.array([1.0, 0.0, 0.25])
    right_n /= np.linalg.norm(right_n)
    planes = (
        Plane(tuple(back_n), float(back_n @ [0.0, 0.0, 4.5]), 0, texture_scale),
        Plane((0.0, 1.0, 0.0), 2.0, 0, texture_scale),
        Plane((0.0, -1.0, 0.0), 2.2, 0, texture_scale),
        Plane((-1.0, 0.0, 0.0), 2.8, 0, texture_scale),
        Plane(tuple(right_n), float(right_n @ [3.0, 0.0, 0.0]), 0, texture_scale),
        Plane((0.0, 0.0, -1.0), 3.0, 0, texture_scale),
    )
    return PlaneScene(planes)


def _texture_waves(texture_id):
    rng = np.random.default_rng(1000 + int(texture_id))
    waves = []
    for wavelength, amp in _OCTAVES:
        for _ in range(2):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            phase = rng.uniform(0, 2 * np.pi, size=3)
            waves.append((2 * np.pi / wavelength * d, amp / 2 * rng.uniform(0.8, 1.2, size=3), phase))
    return waves


def shade(points, texture_id=0, scale=1.0):
    """Procedural RGB color of 3D points, shape (..., 3), values in (0, 1)."""
    out = np.full(points.shape[:-1] + (3,), 0.5)
    for k, amp, phase in _texture_waves(texture_id):
        arg = (points @ k) / scale
        out += amp * np.sin(arg[..., None] + phase)
    return np.clip(out, 0.0, 1.0)


def _rays(k, size):
    H, W = size
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    return np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)


def render(scene, pose, k, size):
    """Render ``scene`` from a camera with world-to-camera transform ``pose``.

    Depth is the camera-frame Z of the nearest forward plane hit. Rays that
    hit nothing get the background color and depth ``FAR_DEPTH``.
    """
    H, W = size
    R = euler_to_rotation(pose.euler_xyz)
    t = np.asarray(pose.translation)
    center = -R.T @ t
    d_cam = _rays(k, (H, W))
    d_world = d_cam @ R  # R.T applied to each ray
    depth = np.full((H, W), np.inf)
    hit_plane = np.full((H, W), -1)
    for i, pl in enumerate(scene.planes):
        n = np.asarray(pl.n)
        denom = d_world @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (pl.c - n @ center) / denom
        # ray parameter s equals camera-frame Z because d_cam has unit z
        better = (s > 1e-9) & (s < depth)
        depth[better] = s[better]
        hit_plane[better] = i

    image = np.empty((H, W, 3))
    image[:] = np.asarray(scene.background, dtype=np.float64)
    missed = hit_plane < 0
    depth[missed] = FAR_DEPTH
    points = center + depth[..., None] * d_world
    for i, pl in enumerate(scene.planes):
        sel = hit_plane == i
        if np.any(sel):
            image[sel] = shade(points[sel], pl.texture, pl.scale)
    return RenderedView(image, depth, pose, k, points)


def make_pair(scene, base_pose, delta, k, size):
    """Render target and reference views.

    ``delta`` is the motion of the reference camera expressed in the target
    camera frame (reference-to-target transform). The returned relative pose
    maps target-camera coordinates to reference-camera coordinates, i.e.
    ``delta.inverse()``.
    """
    view1 = render(scene, base_pose, k, size)
    relative = delta.inverse()
    pose2 = relative.compose(base_pose)
    view2 = render(scene, pose2, k, size)
    return view1, view2, relative


def overlap_ratio(view1, relative, k):
    """Fraction of target pixels whose surface point projects inside the reference frame.

    Computed from the rendered hit points, independently of the warp engine.
    """
    H, W = view1.depth.shape
    cam1 = view1.points @ euler_to_rotation(view1.pose_world_to_cam.euler_xyz).T + np.asarray(
        view1.pose_world_to_cam.translation
    )
    cam2 = cam1 @ euler_to_rotation(relative.euler_xyz).T + np.asarray(relative.translation)
    z = cam2[..., 2]
    front = z > 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * cam2[..., 0] / z + k.cx
        v = k.fy * cam2[..., 1] / z + k.cy
    ok = front & (u >= 0) & (u <= W - 1) & (v >= 0) & (v <= H - 1)
    return float(np.mean(ok))


def random_delta(rng, mean_depth, max_angle_deg=10.0, max_translation=0.2):
    """Random camera motion: angles uniform in +-max_angle_deg, translation uniform in a ball.

    The translation ball has radius ``max_translation * mean_depth``.
    """
    angles = np.deg2rad(rng.uniform(-max_angle_deg, max_angle_deg, size=3))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = max_translation * mean_depth * rng.uniform() ** (1.0 / 3.0)
    return Pose6D(tuple(angles), tuple(radius * direction))


def random_pair(
    rng,
    k,
    size,
    scene=None,
    max_angle_deg=10.0,
    max_translation=0.2,
    valid_band=None,
    max_tries=1000,
):
    """Draw a random pair; with ``valid_band=(lo, hi)`` redraw until the overlap lies in it.

    Returns ``(view1, view2, relative_pose, overlap)``.
    """
    scene = scene or default_scene()
    base = Pose6D.identity()
    view1 = render(scene, base, k, size)
    mean_depth = float(np.mean(view1.depth))
    for _ in range(max_tries):
        delta = random_delta(rng, mean_depth, max_angle_deg, max_translation)
        relative = delta.inverse()
        ratio = overlap_ratio(view1, relative, k)
        if valid_band is None or valid_band[0] <= ratio <= valid_band[1]:
            view2 = render(scene, relative.compose(base), k, size)
            return view1, view2, relative, ratio
    raise RuntimeError(f"no pose with overlap in {valid_band} after {max_tries} draws")
