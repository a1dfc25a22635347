"""``refill3d`` command line: align, fill, synth and eval subcommands.

Exit codes: 0 on success, 1 for input/output problems (missing or
malformed files, size mismatches), 2 when the pose search fails.
"""

import argparse
import json
import os
import sys

import numpy as np

from ._threads import limited_threads
from .align2d import Align2DConfig
from .align3d import Align3DConfig
from .errors import AlignmentFailedError, Refill3DError
from .geometry import Intrinsics, default_intrinsics
from .imgio import (
    AssetBundle,
    load_mask,
    load_pfm,
    load_png,
    read_json,
    save_mask,
    save_outputs,
    save_pfm,
    save_png,
    write_json,
)
from .metrics import evaluate
from .pipeline import PipelineOptions, run_pipeline
from .synth import default_scene, random_pair

EXIT_OK = 0
EXIT_IO = 1
EXIT_ALIGN = 2

DEFAULT_FOCAL = 750.0
DEFAULT_SEED = 0


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _add_pipeline_args(p, with_fill):
    p.add_argument("--target", required=True, help="target image (PNG)")
    p.add_argument("--reference", required=True, help="reference image (PNG)")
    p.add_argument("--depth", required=True, help="target depth map (PFM)")
    p.add_argument("--mask", required=True, help="hole mask PNG, black = hole")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--focal", type=_positive_float, default=DEFAULT_FOCAL, help="focal length in pixels (default 750)")
    p.add_argument("--intrinsics", help="JSON with fx, fy, cx, cy; overrides --focal")
    p.add_argument("--skip-2d", action="store_true", help="bypass the 2D refinement")
    p.add_argument("--dilation-radius", type=_non_negative_int, default=None, help="ring width in pixels")
    p.add_argument("--levels", type=_positive_int, default=4, help="pyramid levels for the pose search")
    p.add_argument("--max-iters", type=_positive_int, default=200, help="iteration cap per level / for 2D")
    if with_fill:
        p.add_argument("--skip-harmonize", action="store_true")
        p.add_argument("--ground-truth", help="optional ground-truth PNG for PSNR/SSIM in metrics.json")


def build_parser():
    parser = argparse.ArgumentParser(prog="refill3d", description="Reference-guided hole filling.")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_pipeline_args(sub.add_parser("align", help="3D + 2D alignment of the reference"), with_fill=False)
    _add_pipeline_args(sub.add_parser("fill", help="align, fill, harmonize and composite"), with_fill=True)

    s = sub.add_parser("synth", help="render a seeded synthetic pair")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default 0)")
    s.add_argument("--size", type=_positive_int, nargs=2, default=(256, 256), metavar=("W", "H"))
    s.add_argument("--focal", type=_positive_float, default=DEFAULT_FOCAL)
    s.add_argument("--max-angle", type=_positive_float, default=3.0, help="per-axis rotation bound, degrees")
    s.add_argument("--max-translation", type=_positive_float, default=0.05, help="as a fraction of mean depth")
    s.add_argument("--texture-scale", type=_positive_float, default=2.0)

    e = sub.add_parser("eval", help="PSNR / SSIM of a prediction")
    e.add_argument("--prediction", required=True)
    e.add_argument("--ground-truth", required=True)
    e.add_argument("--mask", help="hole mask; adds masked_psnr over the hole")
    e.add_argument("--out-dir", help="write metrics.json here")
    return parser


def _intrinsics(args, width, height):
    if args.intrinsics:
        return Intrinsics.from_dict(read_json(args.intrinsics))
    return default_intrinsics(width, height, args.focal)


def _run_pipeline(args, with_fill):
    bundle = AssetBundle(args.target, args.reference, args.depth, args.mask, args.out_dir, args.intrinsics)
    gt_path = getattr(args, "ground_truth", None)
    bundle.check()
    if gt_path is not None and not os.path.isfile(gt_path):
        raise FileNotFoundError(f"ground-truth file not found: {gt_path}")
    target = load_png(args.target)
    reference = load_png(args.reference)
    depth = load_pfm(args.depth).astype(np.float64)
    mask = load_mask(args.mask)
    gt = load_png(gt_path) if gt_path else None
    k = _intrinsics(args, target.shape[1], target.shape[0])
    options = PipelineOptions(
        skip_2d=args.skip_2d,
        skip_harmonize=getattr(args, "skip_harmonize", False),
        align3d=Align3DConfig(pyramid_levels=args.levels, max_iters_per_level=args.max_iters),
        align2d=Align2DConfig(max_iters=args.max_iters, dilation_radius=args.dilation_radius),
    )
    result = run_pipeline(target, mask, reference, depth, k, options, ground_truth=gt)
    if not with_fill:
        result.fill_report = None
    save_outputs(args.out_dir, result)
    write_json(os.path.join(args.out_dir, "intrinsics.json"), k.to_dict())
    return result


def cmd_align(args):
    result = _run_pipeline(args, with_fill=False)
    print(json.dumps(result.align3d.pose.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_fill(args):
    result = _run_pipeline(args, with_fill=True)
    print(json.dumps(result.metrics.to_dict(), sort_keys=True))
    return EXIT_OK


def synth_mask(width, height):
    """Elliptical hole covering roughly 12% of the frame (False = hole)."""
    v, u = np.mgrid[0:height, 0:width]
    return ((u - 0.55 * width) / (0.18 * width)) ** 2 + ((v - 0.45 * height) / (0.22 * height)) ** 2 > 1


def cmd_synth(args):
    width, height = args.size
    k = default_intrinsics(width, height, args.focal)
    scene = default_scene(args.texture_scale)
    rng = np.random.default_rng(args.seed)
    view1, view2, relative, ratio = random_pair(
        rng,
        k,
        (height, width),
        scene=scene,
        max_angle_deg=args.max_angle,
        max_translation=args.max_translation,
        valid_band=(0.6, 0.8),
    )
    mask = synth_mask(width, height)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    save_png(os.path.join(out, "ground_truth.png"), view1.image)
    save_png(os.path.join(out, "target.png"), view1.image * mask[..., None])
    save_png(os.path.join(out, "reference.png"), view2.image)
    save_pfm(os.path.join(out, "depth.pfm"), view1.depth)
    save_pfm(os.path.join(out, "reference_depth.pfm"), view2.depth)
    save_mask(os.path.join(out, "mask.png"), mask)
    write_json(os.path.join(out, "target_pose.json"), view1.pose_world_to_cam.to_dict())
    write_json(os.path.join(out, "reference_pose.json"), view2.pose_world_to_cam.to_dict())
    write_json(os.path.join(out, "relative_pose.json"), relative.to_dict())
    write_json(os.path.join(out, "intrinsics.json"), k.to_dict())
    write_json(os.path.join(out, "scene.json"), scene.to_dict())
    print(json.dumps({"seed": args.seed, "valid_ratio": round(ratio, 6)}, sort_keys=True))
    return EXIT_OK


def cmd_eval(args):
    for path in (args.prediction, args.ground_truth, args.mask):
        if path is not None and not os.path.isfile(path):
            raise FileNotFoundError(f"file not found: {path}")
    pred = load_png(args.prediction)
    gt = load_png(args.ground_truth)
    mask = load_mask(args.mask) if args.mask else None
    report = evaluate(pred, gt, mask)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        write_json(os.path.join(args.out_dir, "metrics.json"), report.to_dict())
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


COMMANDS = {"align": cmd_align, "fill": cmd_fill, "synth": cmd_synth, "eval": cmd_eval}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with limited_threads():
            return COMMANDS[args.command](args)
    except AlignmentFailedError as exc:
        print(f"refill3d: alignment failed: {exc}", file=sys.stderr)
        return EXIT_ALIGN
    except (OSError, ValueError, KeyError, Refill3DError) as exc:
        print(f"refill3d: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
