"""Reference-guided hole filling by depth-based 3D reprojection and 2D refinement."""

from .align2d import Align2DConfig, Align2DResult, ScaledEuclidean2D, ScaledEuclideanAligner, align_2d
from .align3d import Align3DConfig, Align3DResult, PoseAligner3D, align_3d
from .compose import FillReport, compose_final, fill, harmonize
from .geometry import Intrinsics, PixelFlow, Pose6D, default_intrinsics, reproject_grid
from .metrics import MetricsReport, psnr, ssim
from .pipeline import PipelineOptions, PipelineResult, ReferenceInpainter, run_pipeline

__all__ = [
    "Align2DConfig",
    "Align2DResult",
    "Align3DConfig",
    "Align3DResult",
    "FillReport",
    "Intrinsics",
    "MetricsReport",
    "PipelineOptions",
    "PipelineResult",
    "PixelFlow",
    "Pose6D",
    "PoseAligner3D",
    "ReferenceInpainter",
    "ScaledEuclidean2D",
    "ScaledEuclideanAligner",
    "align_2d",
    "align_3d",
    "compose_final",
    "default_intrinsics",
    "fill",
    "harmonize",
    "psnr",
    "reproject_grid",
    "run_pipeline",
    "ssim",
]

__version__ = "0.1.0"
