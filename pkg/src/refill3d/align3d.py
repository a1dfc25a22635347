"""Six-DOF photometric alignment of a reference image to a masked target.

The relative pose is found by directly minimizing a robust L1 photometric
loss between the reference, reprojected into the target view through the
target depth map, and the observed (non-hole) target pixels. Optimization
runs coarse-to-fine over an image pyramid.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_depth, check_image, check_mask, check_same_shape
from .errors import AlignmentFailedError, DimensionMismatchError, EmptyOverlapError
from .geometry import (
    EPS_Z,
    Intrinsics,
    Pose6D,
    backproject,
    default_intrinsics,
    euler_to_rotation,
    pixel_grid,
    reproject_grid,
    rotation_derivatives,
)
from .optim import minimize
from .sampler import planes, sample_planes, warp_image

#: Minimum fraction of the level's pixels that must be known and in view.
MIN_OVERLAP = 0.01


@dataclass
class Align3DConfig:
    pyramid_levels: int = 4
    max_iters_per_level: int = 200
    step_tolerance: float = 1e-7
    charbonnier_eps: float = 1e-3
    initial_pose: Pose6D = field(default_factory=Pose6D.identity)
    optimizer: str = "gauss-newton"

    def __post_init__(self):
        if int(self.pyramid_levels) < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if int(self.max_iters_per_level) < 1:
            raise ValueError("max_iters_per_level must be >= 1")
        if not (self.step_tolerance > 0 and self.charbonnier_eps > 0):
            raise ValueError("tolerances must be positive")
        if self.optimizer not in ("gauss-newton", "steepest-descent"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if isinstance(self.initial_pose, dict):
            self.initial_pose = Pose6D.from_dict(self.initial_pose)

    def to_dict(self):
        d = asdict(self)
        d["initial_pose"] = self.initial_pose.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class Align3DResult:
    pose: Pose6D
    coarse: np.ndarray
    valid: np.ndarray
    final_loss: float
    iterations: int
    #: accepted loss values per pyramid level, coarsest first
    history: list = field(default_factory=list, repr=False)


def charbonnier(r, eps):
    return np.sqrt(r * r + eps * eps) - eps


class PhotometricObjective3D:
    """Robust photometric loss of a pose vector at one resolution.

    Only pixels that are known in the target are ever touched, so hole
    content cannot leak into the loss or its derivatives.
    """

    def __init__(self, target, known_mask, reference, depth, k, eps=1e-3):
        self.reference = reference
        self._ref_planes = planes(reference)
        self.k = k
        self.eps = eps
        H, W = known_mask.shape
        self.shape = (H, W)
        self.min_count = MIN_OVERLAP * H * W
        u, v = pixel_grid(H, W)
        # (3, n) so that rotating all points is a single small matrix product
        self.points = np.ascontiguousarray(backproject(u[known_mask], v[known_mask], depth[known_mask], k).T)
        # (C, n): channel-first keeps the per-pixel arithmetic contiguous
        self.target = np.ascontiguousarray(target[known_mask].T)

    def _project(self, x):
        R = euler_to_rotation(x[:3])
        q = R @ self.points + x[3:, None]
        z = q[2]
        H, W = self.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            ur = self.k.fx * q[0] / z + self.k.cx
            vr = self.k.fy * q[1] / z + self.k.cy
        ok = (z > EPS_Z) & (ur >= 0) & (ur <= W - 1) & (vr >= 0) & (vr <= H - 1)
        return q, ur, vr, ok

    def qualifying(self, x):
        """Boolean selector over known pixels that reproject validly."""
        return self._project(np.asarray(x, dtype=np.float64))[3]

    def __call__(self, x, grad=False, hessian=False):
        """Return ``loss`` or ``(loss, gradient[, gauss_newton_matrix])``.

        The loss is ``+inf`` when fewer than 1% of the level's pixels qualify.
        """
        x = np.asarray(x, dtype=np.float64)
        q, ur, vr, ok = self._project(x)
        n = int(np.count_nonzero(ok))
        if n < self.min_count or n == 0:
            if not grad:
                return np.inf
            return (np.inf, np.full(6, np.nan)) + ((np.full((6, 6), np.nan),) if hessian else ())
        idx = np.flatnonzero(ok)
        ur, vr = ur.take(idx), vr.take(idx)
        if grad:
            val, gu, gv = sample_planes(self._ref_planes, self.shape, ur, vr, grad=True)
        else:
            val = sample_planes(self._ref_planes, self.shape, ur, vr)
        r = val - self.target.take(idx, axis=1)
        s = np.sqrt(r * r + self.eps * self.eps)
        count = r.size
        loss = float(np.sum(s - self.eps) / count)
        if not grad:
            return loss

        q = q.take(idx, axis=1)
        p = self.points.take(idx, axis=1)
        iz = 1.0 / q[2]
        fx, fy = self.k.fx, self.k.fy
        xz = q[0] * iz
        yz = q[1] * iz
        # pixel-coordinate Jacobians du/dx_j and dv/dx_j, shape (6, n)
        du = np.empty((6, iz.size))
        dv = np.empty((6, iz.size))
        for j, D in enumerate(rotation_derivatives(x[:3])):
            dq = D @ p
            du[j] = fx * iz * (dq[0] - xz * dq[2])
            dv[j] = fy * iz * (dq[1] - yz * dq[2])
        du[3], du[4], du[5] = fx * iz, 0.0, -fx * iz * xz
        dv[3], dv[4], dv[5] = 0.0, fy * iz, -fy * iz * yz
        # the residual Jacobian is gu * du + gv * dv per channel, so channel
        # sums can be taken first; einsum keeps reductions off BLAS
        psi = r / s
        a = np.einsum("cn,cn->n", psi, gu)
        b = np.einsum("cn,cn->n", psi, gv)
        g = (np.einsum("jn,n->j", du, a) + np.einsum("jn,n->j", dv, b)) / count
        if not hessian:
            return loss, g
        w = 1.0 / s
        wgu = w * gu
        suu = np.einsum("cn,cn->n", wgu, gu)
        suv = np.einsum("cn,cn->n", wgu, gv)
        svv = np.einsum("cn,cn->n", w * gv, gv)
        B = np.einsum("an,bn->ab", du * suv, dv)
        Hm = (np.einsum("an,bn->ab", du * suu, du) + B + B.T + np.einsum("an,bn->ab", dv * svv, dv)) / count
        Hm = 0.5 * (Hm + Hm.T)
        return loss, g, Hm


def _prepare(target, known_mask, reference, depth_t):
    target = check_image(target, "target")
    reference = check_image(reference, "reference")
    known_mask = check_mask(known_mask, "known_mask")
    depth_t = check_depth(depth_t, "depth_t")
    check_same_shape(target=target, known_mask=known_mask, reference=reference, depth_t=depth_t)
    if target.shape[2] != reference.shape[2]:
        raise DimensionMismatchError("target and reference must have the same channel count")
    return target, known_mask, reference, depth_t


def _pose_vector(pose):
    return pose.as_vector() if isinstance(pose, Pose6D) else np.asarray(pose, dtype=np.float64)


def photometric_loss_3d(pose, target_known, known_mask, reference, depth_t, k, eps=1e-3):
    """Mean Charbonnier-smoothed L1 between the warped reference and the target.

    Averaged over all channels of pixels that are known (``known_mask == 1``)
    and reproject inside the reference image in front of the camera. Returns
    ``inf`` when fewer than 1% of the pixels qualify.
    """
    args = _prepare(target_known, known_mask, reference, depth_t)
    return PhotometricObjective3D(*args, k, eps)(_pose_vector(pose))


def loss_gradient_3d(pose, target_known, known_mask, reference, depth_t, k, eps=1e-3):
    """Gradient of :func:`photometric_loss_3d` w.r.t. ``(alpha, beta, gamma, tx, ty, tz)``.

    Raises EmptyOverlapError where the loss is the ``inf`` sentinel.
    """
    args = _prepare(target_known, known_mask, reference, depth_t)
    loss, g = PhotometricObjective3D(*args, k, eps)(_pose_vector(pose), grad=True)
    if not np.isfinite(loss):
        raise EmptyOverlapError("fewer than 1% of pixels are known and in view")
    return g


def _box_down(img):
    H, W = img.shape[:2]
    h, w = H // 2, W // 2
    a = img[: 2 * h, : 2 * w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def _mask_down(m):
    H, W = m.shape
    h, w = H // 2, W // 2
    a = m[: 2 * h, : 2 * w]
    return a[0::2, 0::2] & a[1::2, 0::2] & a[0::2, 1::2] & a[1::2, 1::2]


def build_pyramid(target, known_mask, reference, depth, k, levels, min_size=8):
    """Finest-first list of ``(target, known_mask, reference, depth, k)`` tuples.

    Images and depth are 2x box-filtered, the known mask is eroded so a
    coarse pixel is known only when all of its children are.
    """
    pyr = [(target, known_mask, reference, depth, k)]
    for _ in range(levels - 1):
        t, m, r, d, kk = pyr[-1]
        if min(m.shape) // 2 < min_size:
            break
        pyr.append((_box_down(t), _mask_down(m), _box_down(r), _box_down(d), kk.downscaled(2)))
    return pyr


def align_3d(target, hole_mask, reference, depth_t, k, cfg=None):
    """Estimate the target-to-reference pose and warp the reference into the target view.

    Parameters
    ----------
    target : array (H, W[, C])
        Target image in [0, 1]; values inside the hole are ignored.
    hole_mask : array (H, W)
        1 for known pixels, 0 for the hole.
    reference : array (H, W[, C])
        Second view of the scene.
    depth_t : array (H, W)
        Positive depth of the target view.
    k : Intrinsics
    cfg : Align3DConfig, optional

    Returns
    -------
    Align3DResult
    """
    cfg = cfg or Align3DConfig()
    target, known, reference, depth_t = _prepare(target, hole_mask, reference, depth_t)
    pyramid = build_pyramid(target, known, reference, depth_t, k, int(cfg.pyramid_levels))

    x = cfg.initial_pose.as_vector()
    history = []
    iterations = 0
    loss = np.inf
    for level, (t, m, r, d, kk) in enumerate(reversed(pyramid)):
        objective = PhotometricObjective3D(t, m, r, d, kk, cfg.charbonnier_eps)
        if level == 0 and not np.isfinite(objective(x)):
            raise AlignmentFailedError(
                "no overlap between target and reprojected reference at the coarsest level"
            )
        res = minimize(
            objective,
            x,
            method=cfg.optimizer,
            max_iters=int(cfg.max_iters_per_level),
            step_tolerance=cfg.step_tolerance,
        )
        x = res.x
        loss = res.fun
        iterations += res.iterations
        history.append(res.history)

    pose = Pose6D.from_vector(x)
    flow = reproject_grid(depth_t, pose, k)
    coarse, valid = warp_image(reference, flow)
    return Align3DResult(pose, coarse, valid, float(loss), iterations, history)


class PoseAligner3D(BaseEstimator):
    """Estimator wrapper around :func:`align_3d`.

    ``fit`` recovers the pose; ``transform`` warps an image taken from the
    reference viewpoint into the target view using the fitted pose.

    Examples
    --------
    >>> aligner = PoseAligner3D(focal=750.0).fit(target, reference, depth, hole_mask)
    >>> coarse = aligner.transform(reference)
    """

    def __init__(
        self,
        focal=750.0,
        intrinsics=None,
        pyramid_levels=4,
        max_iters_per_level=200,
        step_tolerance=1e-7,
        charbonnier_eps=1e-3,
        initial_pose=None,
        optimizer="gauss-newton",
    ):
        self.focal = focal
        self.intrinsics = intrinsics
        self.pyramid_levels = pyramid_levels
        self.max_iters_per_level = max_iters_per_level
        self.step_tolerance = step_tolerance
        self.charbonnier_eps = charbonnier_eps
        self.initial_pose = initial_pose
        self.optimizer = optimizer

    def _config(self):
        return Align3DConfig(
            pyramid_levels=self.pyramid_levels,
            max_iters_per_level=self.max_iters_per_level,
            step_tolerance=self.step_tolerance,
            charbonnier_eps=self.charbonnier_eps,
            initial_pose=self.initial_pose or Pose6D.identity(),
            optimizer=self.optimizer,
        )

    def _intrinsics_for(self, shape):
        if self.intrinsics is not None:
            k = self.intrinsics
            return Intrinsics.from_dict(k) if isinstance(k, dict) else k
        return default_intrinsics(shape[1], shape[0], self.focal)

    def fit(self, target, reference, depth, hole_mask=None):
        target = check_image(target, "target")
        if hole_mask is None:
            hole_mask = np.ones(target.shape[:2], dtype=bool)
        self.intrinsics_ = self._intrinsics_for(target.shape)
        self.result_ = align_3d(target, hole_mask, reference, depth, self.intrinsics_, self._config())
        self.pose_ = self.result_.pose
        self.depth_ = check_depth(depth)
        self.loss_ = self.result_.final_loss
        self.n_iter_ = self.result_.iterations
        return self

    def transform(self, reference):
        """Warp ``reference`` into the target view; sets ``valid_``."""
        if not hasattr(self, "pose_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("PoseAligner3D is not fitted yet")
        flow = reproject_grid(self.depth_, self.pose_, self.intrinsics_)
        out, self.valid_ = warp_image(reference, flow)
        return out

    def fit_transform(self, target, reference, depth, hole_mask=None):
        self.fit(target, reference, depth, hole_mask)
        self.valid_ = self.result_.valid
        return self.result_.coarse
