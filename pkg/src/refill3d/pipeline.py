"""End-to-end flow: 3D alignment, 2D refinement, fill, harmonize, composite."""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_depth, check_image, check_mask, check_same_shape
from .align2d import Align2DConfig, Align2DResult, align_2d
from .align3d import Align3DConfig, Align3DResult, align_3d, photometric_loss_3d
from .compose import FillReport, compose_final, coverage, fill, harmonize
from .geometry import Intrinsics, Pose6D, default_intrinsics, reproject_grid
from .metrics import MetricsReport, evaluate, valid_ratio
from .sampler import dilate_mask, scaled_radius, warp_image


@dataclass
class PipelineOptions:
    skip_3d: bool = False
    skip_2d: bool = False
    skip_harmonize: bool = False
    align3d: Align3DConfig = field(default_factory=Align3DConfig)
    align2d: Align2DConfig = field(default_factory=Align2DConfig)


@dataclass
class PipelineResult:
    align3d: Align3DResult
    #: None when the 2D stage was switched off
    align2d: Align2DResult
    fill_report: FillReport
    metrics: MetricsReport
    fine: np.ndarray = field(repr=False, default=None)
    valid: np.ndarray = field(repr=False, default=None)
    #: stages in the order they ran
    stages: list = field(default_factory=list)

    @property
    def result(self):
        return self.fill_report.result

    def panels(self, target, reference):
        """Images for a side-by-side figure: target, reference, coarse, fine, result."""
        return {
            "target": target,
            "reference": reference,
            "coarse": self.align3d.coarse,
            "fine": self.fine,
            "result": self.result,
        }


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        try:
            relabeled = type(exc)(f"[{name}] {exc}")
        except Exception:
            raise exc
        raise relabeled from exc


def _identity_alignment(target, known, reference, depth, k, cfg):
    pose = Pose6D.identity()
    coarse, valid = warp_image(reference, reproject_grid(depth, pose, k))
    loss = photometric_loss_3d(pose, target, known, reference, depth, k, cfg.charbonnier_eps)
    return Align3DResult(pose, coarse, valid, float(loss), 0, [])


def run_pipeline(target, hole_mask, reference, depth_t, k, options=None, ground_truth=None):
    """Fill the hole of ``target`` from ``reference``.

    Stages run in a fixed order: align3d, align2d, fill, harmonize,
    compose. ``skip_3d`` replaces the pose search by the identity pose,
    ``skip_2d`` and ``skip_harmonize`` bypass their stages. With
    ``ground_truth`` the metrics include PSNR / SSIM of the result.
    """
    options = options or PipelineOptions()
    target = check_image(target, "target")
    reference = check_image(reference, "reference")
    known = check_mask(hole_mask, "hole_mask")
    depth_t = check_depth(depth_t, "depth_t")
    check_same_shape(target=target, hole_mask=known, reference=reference, depth_t=depth_t)
    H, W = known.shape
    stages = []

    if options.skip_3d:
        a3 = _stage("align3d", _identity_alignment, target, known, reference, depth_t, k, options.align3d)
    else:
        a3 = _stage("align3d", align_3d, target, known, reference, depth_t, k, options.align3d)
    stages.append("align3d")

    a2 = None
    fine, valid = a3.coarse, a3.valid
    if not options.skip_2d:
        a2 = _stage("align2d", align_2d, target, known, a3.coarse, a3.valid, options.align2d)
        fine, valid = a2.fine, a2.valid
        stages.append("align2d")

    filled = _stage("fill", fill, target, known, fine)
    stages.append("fill")

    radius = options.align2d.dilation_radius
    if radius is None:
        radius = scaled_radius(H, W)
    dilated = a2.dilated if a2 is not None else dilate_mask(known, radius)
    C = fine.shape[2]
    if options.skip_harmonize:
        harmonized, gain, bias, ok = fine, np.ones(C), np.zeros(C), False
    else:
        harmonized, gain, bias, ok = _stage("harmonize", harmonize, fine, target, known, dilated, valid)
        stages.append("harmonize")

    result = _stage("compose", compose_final, target, known, harmonized)
    stages.append("compose")

    cov = coverage(known, valid)
    report = FillReport(filled, cov, gain, bias, ok, result)
    if ground_truth is not None:
        metrics = evaluate(result, ground_truth, known, a3.valid, cov)
    else:
        metrics = MetricsReport(valid_ratio=valid_ratio(a3.valid), coverage=cov)
    return PipelineResult(a3, a2, report, metrics, fine, valid, stages)


class ReferenceInpainter(BaseEstimator):
    """Estimator wrapper around :func:`run_pipeline`.

    Examples
    --------
    >>> inpainter = ReferenceInpainter(focal=750.0)
    >>> result = inpainter.fit_transform(target, hole_mask, reference, depth)
    """

    def __init__(
        self,
        focal=750.0,
        intrinsics=None,
        pyramid_levels=4,
        max_iters_per_level=200,
        max_iters_2d=100,
        dilation_radius=None,
        skip_3d=False,
        skip_2d=False,
        skip_harmonize=False,
    ):
        self.focal = focal
        self.intrinsics = intrinsics
        self.pyramid_levels = pyramid_levels
        self.max_iters_per_level = max_iters_per_level
        self.max_iters_2d = max_iters_2d
        self.dilation_radius = dilation_radius
        self.skip_3d = skip_3d
        self.skip_2d = skip_2d
        self.skip_harmonize = skip_harmonize

    def _options(self):
        return PipelineOptions(
            skip_3d=self.skip_3d,
            skip_2d=self.skip_2d,
            skip_harmonize=self.skip_harmonize,
            align3d=Align3DConfig(pyramid_levels=self.pyramid_levels, max_iters_per_level=self.max_iters_per_level),
            align2d=Align2DConfig(max_iters=self.max_iters_2d, dilation_radius=self.dilation_radius),
        )

    def fit(self, target, hole_mask, reference, depth, ground_truth=None):
        target = check_image(target, "target")
        if self.intrinsics is not None:
            k = self.intrinsics
            self.intrinsics_ = Intrinsics.from_dict(k) if isinstance(k, dict) else k
        else:
            self.intrinsics_ = default_intrinsics(target.shape[1], target.shape[0], self.focal)
        self.result_ = run_pipeline(
            target, hole_mask, reference, depth, self.intrinsics_, self._options(), ground_truth
        )
        self.pose_ = self.result_.align3d.pose
        self.transform_2d_ = self.result_.align2d.transform if self.result_.align2d is not None else None
        return self

    def fit_transform(self, target, hole_mask, reference, depth, ground_truth=None):
        return self.fit(target, hole_mask, reference, depth, ground_truth).result_.result

    def score(self, ground_truth, hole_mask):
        """PSNR of the inpainted result against ``ground_truth`` inside the hole."""
        from .metrics import psnr

        return psnr(self.result_.result, ground_truth, ~check_mask(hole_mask))
