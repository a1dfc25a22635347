"""Scaled-Euclidean refinement of a coarse alignment around the hole.

The transform maps coarse-image pixel coordinates to fine-image coordinates::

    [u']   [s cos(theta)  -s sin(theta)  tx] [u]
    [v'] = [s sin(theta)   s cos(theta)  ty] [v]
    [1 ]   [0              0              1] [1]

The fine image is produced by pulling each output pixel from the coarse
image at the inverse-mapped location. Parameters are fitted by minimizing
a robust L1 loss on the observable band around the hole (dilated hole minus
hole).
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_image, check_mask, check_same_shape
from .errors import EmptyRingError
from .optim import minimize
from .sampler import _corners, dilate_mask, planes, sample, sample_planes, scaled_radius
from .geometry import pixel_grid


@dataclass(frozen=True)
class ScaledEuclidean2D:
    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        vals = (self.theta, self.tx, self.ty, self.s)
        if not all(np.isfinite(vals)):
            raise ValueError("transform parameters must be finite")
        if not self.s > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_vector(cls, x):
        return cls(*(float(a) for a in x))

    def as_vector(self):
        return np.array([self.theta, self.tx, self.ty, self.s])

    @property
    def matrix(self):
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([[self.s * c, -self.s * s, self.tx], [self.s * s, self.s * c, self.ty], [0.0, 0.0, 1.0]])

    def inverse(self):
        c, s = np.cos(self.theta), np.sin(self.theta)
        tx = -(c * self.tx + s * self.ty) / self.s
        ty = -(-s * self.tx + c * self.ty) / self.s
        return ScaledEuclidean2D(-self.theta, tx, ty, 1.0 / self.s)

    def to_dict(self):
        return {"theta": float(self.theta), "tx": float(self.tx), "ty": float(self.ty), "s": float(self.s)}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["theta"]), float(d["tx"]), float(d["ty"]), float(d["s"]))


def apply_se2(t, u, v):
    """Map coarse coordinates ``(u, v)`` to fine coordinates."""
    c, s = np.cos(t.theta), np.sin(t.theta)
    return t.s * c * u - t.s * s * v + t.tx, t.s * s * u + t.s * c * v + t.ty


def _inverse_map(x, u, v, with_jacobian=False):
    """Source coordinates ``T^-1 (u, v)`` for parameter vector ``x`` and their derivatives."""
    theta, tx, ty, s = x
    c, sn = np.cos(theta), np.sin(theta)
    dx = u - tx
    dy = v - ty
    us = (c * dx + sn * dy) / s
    vs = (-sn * dx + c * dy) / s
    if not with_jacobian:
        return us, vs
    dus = [vs, np.full_like(u, -c / s), np.full_like(u, -sn / s), -us / s]
    dvs = [-us, np.full_like(u, sn / s), np.full_like(u, -c / s), -vs / s]
    return us, vs, dus, dvs


def _valid_lookup(valid, u, v):
    """True where ``(u, v)`` is in bounds and every corner with non-zero weight is valid."""
    H, W = valid.shape
    ok = (u >= 0) & (u <= W - 1) & (v >= 0) & (v <= H - 1)
    uu = np.where(ok, u, 0.0)
    vv = np.where(ok, v, 0.0)
    i0, fu = _corners(W, uu)
    j0, fv = _corners(H, vv)
    i1 = np.minimum(i0 + 1, W - 1)
    j1 = np.minimum(j0 + 1, H - 1)
    ok &= valid[j0, i0] | ((fu == 1) | (fv == 1))
    ok &= valid[j0, i1] | (fu == 0) | (fv == 1)
    ok &= valid[j1, i0] | (fu == 1) | (fv == 0)
    ok &= valid[j1, i1] | (fu == 0) | (fv == 0)
    return ok


def warp_se2(img, valid, t):
    """Resample ``img`` so that ``out(p) = img(T^-1 p)``; returns ``(out, valid_out)``."""
    img = check_image(img)
    valid = check_mask(valid, "valid")
    H, W = valid.shape
    u, v = pixel_grid(H, W)
    us, vs = _inverse_map(t.as_vector(), u, v)
    ok = _valid_lookup(valid, us, vs)
    out = np.zeros_like(img)
    out[ok] = sample(img, us[ok], vs[ok])
    return out, ok


def ring_mask(hole_mask, dilated):
    """Known pixels inside the dilated hole: ``(1 - M_big) * M``."""
    return ~dilated & hole_mask


class RingObjective2D:
    """Robust L1 between the resampled coarse image and the target on the ring."""

    def __init__(self, target, ring, coarse, valid3d, eps=1e-3):
        H, W = ring.shape
        u, v = pixel_grid(H, W)
        self.u = u[ring]
        self.v = v[ring]
        self.target = np.ascontiguousarray(target[ring].T)
        self.coarse = coarse
        self._coarse_planes = planes(coarse)
        self.valid3d = valid3d
        self.eps = eps
        self.ring_size = int(self.u.size)
        self.min_count = max(1, int(np.ceil(MIN_RING_OVERLAP * self.ring_size)))

    def __call__(self, x, grad=False, hessian=False):
        x = np.asarray(x, dtype=np.float64)
        nothing = (np.inf, np.full(4, np.nan)) + ((np.full((4, 4), np.nan),) if hessian else ())
        if self.ring_size == 0 or not x[3] > 0:
            return nothing if grad else np.inf
        us, vs = _inverse_map(x, self.u, self.v)
        ok = _valid_lookup(self.valid3d, us, vs)
        if np.count_nonzero(ok) < self.min_count:
            return nothing if grad else np.inf
        shape = self.coarse.shape[:2]
        if grad:
            val, gu, gv = sample_planes(self._coarse_planes, shape, us[ok], vs[ok], grad=True)
        else:
            val = sample_planes(self._coarse_planes, shape, us[ok], vs[ok])
        r = val - self.target[:, ok]
        sq = np.sqrt(r * r + self.eps * self.eps)
        count = r.size
        loss = float(np.sum(sq - self.eps) / count)
        if not grad:
            return loss
        _, _, dus, dvs = _inverse_map(x, self.u[ok], self.v[ok], with_jacobian=True)
        du, dv = np.asarray(dus), np.asarray(dvs)
        # channel sums first, as in the 3D objective
        psi = r / sq
        a = np.einsum("cn,cn->n", psi, gu)
        b = np.einsum("cn,cn->n", psi, gv)
        g = (np.einsum("jn,n->j", du, a) + np.einsum("jn,n->j", dv, b)) / count
        if not hessian:
            return loss, g
        w = 1.0 / sq
        wgu = w * gu
        suu = np.einsum("cn,cn->n", wgu, gu)
        suv = np.einsum("cn,cn->n", wgu, gv)
        svv = np.einsum("cn,cn->n", w * gv, gv)
        B = np.einsum("an,bn->ab", du * suv, dv)
        Hm = (np.einsum("an,bn->ab", du * suu, du) + B + B.T + np.einsum("an,bn->ab", dv * svv, dv)) / count
        return loss, g, 0.5 * (Hm + Hm.T)


#: Minimum fraction of ring pixels that must resample validly.
MIN_RING_OVERLAP = 0.01


def _prepare(target, hole_mask, dilated, coarse, valid3d):
    target = check_image(target, "target")
    coarse = check_image(coarse, "coarse")
    hole_mask = check_mask(hole_mask, "hole_mask")
    dilated = check_mask(dilated, "dilated")
    valid3d = check_mask(valid3d, "valid3d")
    check_same_shape(target=target, hole_mask=hole_mask, dilated=dilated, coarse=coarse, valid3d=valid3d)
    return target, hole_mask, dilated, coarse, valid3d


def ring_loss_2d(t, target, hole_mask, dilated, coarse, valid3d, eps=1e-3):
    """Ring photometric loss of transform ``t``; ``inf`` when the ring is empty."""
    target, hole_mask, dilated, coarse, valid3d = _prepare(target, hole_mask, dilated, coarse, valid3d)
    obj = RingObjective2D(target, ring_mask(hole_mask, dilated), coarse, valid3d, eps)
    return obj(t.as_vector() if isinstance(t, ScaledEuclidean2D) else t)


def ring_gradient_2d(t, target, hole_mask, dilated, coarse, valid3d, eps=1e-3):
    """Gradient of :func:`ring_loss_2d` w.r.t. ``(theta, tx, ty, s)``."""
    target, hole_mask, dilated, coarse, valid3d = _prepare(target, hole_mask, dilated, coarse, valid3d)
    obj = RingObjective2D(target, ring_mask(hole_mask, dilated), coarse, valid3d, eps)
    loss, g = obj(t.as_vector() if isinstance(t, ScaledEuclidean2D) else t, grad=True)
    if not np.isfinite(loss):
        raise EmptyRingError("no observable pixels around the hole")
    return g


@dataclass
class Align2DConfig:
    max_iters: int = 100
    step_tolerance: float = 1e-7
    charbonnier_eps: float = 1e-3
    #: None picks round(15 * min(H, W) / 512)
    dilation_radius: int = None
    optimizer: str = "gauss-newton"

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.step_tolerance > 0 and self.charbonnier_eps > 0):
            raise ValueError("tolerances must be positive")
        if self.dilation_radius is not None and self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        if self.optimizer not in ("gauss-newton", "steepest-descent"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Align2DResult:
    transform: ScaledEuclidean2D
    fine: np.ndarray
    valid: np.ndarray
    final_loss: float
    initial_loss: float = np.inf
    iterations: int = 0
    skipped: bool = False
    dilated: np.ndarray = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)


def align_2d(target, hole_mask, coarse, valid3d, cfg=None):
    """Fit the scaled-Euclidean correction and resample the coarse image.

    When no known pixel borders the hole the refinement is skipped: the
    identity transform is returned together with the unchanged coarse image
    and ``skipped=True``.
    """
    cfg = cfg or Align2DConfig()
    target = check_image(target, "target")
    hole_mask = check_mask(hole_mask, "hole_mask")
    H, W = hole_mask.shape
    radius = cfg.dilation_radius if cfg.dilation_radius is not None else scaled_radius(H, W)
    dilated = dilate_mask(hole_mask, radius)
    target, hole_mask, dilated, coarse, valid3d = _prepare(target, hole_mask, dilated, coarse, valid3d)

    objective = RingObjective2D(target, ring_mask(hole_mask, dilated), coarse, valid3d, cfg.charbonnier_eps)
    x0 = ScaledEuclidean2D.identity().as_vector()
    f0 = objective(x0)
    if not np.isfinite(f0):
        return Align2DResult(
            ScaledEuclidean2D.identity(), coarse.copy(), valid3d.copy(), np.inf, np.inf, 0, True, dilated
        )
    res = minimize(objective, x0, method=cfg.optimizer, max_iters=int(cfg.max_iters), step_tolerance=cfg.step_tolerance)
    t = ScaledEuclidean2D.from_vector(res.x)
    fine, valid = warp_se2(coarse, valid3d, t)
    return Align2DResult(t, fine, valid, res.fun, f0, res.iterations, False, dilated, res.history)


class ScaledEuclideanAligner(BaseEstimator):
    """Estimator wrapper around :func:`align_2d`."""

    def __init__(self, max_iters=100, step_tolerance=1e-7, charbonnier_eps=1e-3, dilation_radius=None, optimizer="gauss-newton"):
        self.max_iters = max_iters
        self.step_tolerance = step_tolerance
        self.charbonnier_eps = charbonnier_eps
        self.dilation_radius = dilation_radius
        self.optimizer = optimizer

    def fit(self, target, coarse, hole_mask, valid=None):
        coarse = check_image(coarse, "coarse")
        if valid is None:
            valid = np.ones(coarse.shape[:2], dtype=bool)
        cfg = Align2DConfig(self.max_iters, self.step_tolerance, self.charbonnier_eps, self.dilation_radius, self.optimizer)
        self.result_ = align_2d(target, hole_mask, coarse, valid, cfg)
        self.transform_ = self.result_.transform
        self.loss_ = self.result_.final_loss
        self.skipped_ = self.result_.skipped
        return self

    def transform(self, coarse, valid=None):
        """Resample ``coarse`` with the fitted transform; sets ``valid_``."""
        if not hasattr(self, "transform_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("ScaledEuclideanAligner is not fitted yet")
        coarse = check_image(coarse, "coarse")
        if valid is None:
            valid = np.ones(coarse.shape[:2], dtype=bool)
        out, self.valid_ = warp_se2(coarse, valid, self.transform_)
        return out
