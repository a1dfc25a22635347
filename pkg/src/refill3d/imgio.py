"""PNG / PFM / JSON input and output."""

import json
import os
import re
from dataclasses import dataclass

import numpy as np
import png

from ._validation import check_image, check_mask
from .errors import ImageFormatError, InvalidDepthError

MASK_THRESHOLD = 128


@dataclass
class AssetBundle:
    target_path: str
    reference_path: str
    depth_path: str
    mask_path: str
    output_dir: str
    intrinsics_path: str = None

    def check(self):
        for name in ("target_path", "reference_path", "depth_path", "mask_path", "intrinsics_path"):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise FileNotFoundError(f"{name.replace('_path', '')} file not found: {path}")


def _read_png(path):
    try:
        width, height, rows, info = png.Reader(filename=path).asDirect()
        data = np.vstack([np.asarray(row, dtype=np.uint32) for row in rows])
    except FileNotFoundError:
        raise
    except (png.Error, ValueError, OSError, EOFError) as exc:
        raise ImageFormatError(f"cannot decode PNG {path}: {exc}") from exc
    if info.get("alpha"):
        raise ImageFormatError(f"{path}: PNG with alpha channel is not supported")
    planes = info["planes"]
    if planes not in (1, 3):
        raise ImageFormatError(f"{path}: unsupported PNG color type ({planes} planes)")
    return data.reshape(height, width, planes), info["bitdepth"]


def load_png(path):
    """Read an 8- or 16-bit grayscale / RGB PNG as float64 (H, W, C) in [0, 1]."""
    data, bitdepth = _read_png(path)
    if bitdepth == 16:
        return data / 65535.0
    if bitdepth == 8:
        return data / 255.0
    return data / float(2**bitdepth - 1)


def to_uint8(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, img):
    """Write a float image in [0, 1] (or a boolean mask) as an 8-bit PNG."""
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    elif arr.dtype != np.uint8:
        arr = to_uint8(check_image(arr))
    if arr.ndim == 2:
        arr = arr[:, :, None]
    H, W, C = arr.shape
    writer = png.Writer(W, H, greyscale=(C == 1), bitdepth=8, compression=9)
    with open(path, "wb") as fh:
        writer.write(fh, arr.reshape(H, W * C).tolist())
    return path


def load_mask(path):
    """Read an 8-bit grayscale PNG mask; values < 128 are hole (0), the rest known (1)."""
    data, bitdepth = _read_png(path)
    if data.shape[2] != 1 or bitdepth != 8:
        raise ImageFormatError(f"{path}: mask must be an 8-bit grayscale PNG")
    return data[:, :, 0] >= MASK_THRESHOLD


def save_mask(path, mask):
    return save_png(path, check_mask(mask))


_PFM_DIMS = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def load_pfm(path, check=True):
    """Read a single-channel ("Pf") PFM depth map, flipping rows to top-to-bottom order.

    A negative scale marks little-endian data. With ``check`` (default)
    non-positive or non-finite values raise InvalidDepthError.
    """
    with open(path, "rb") as fh:
        header = fh.readline().rstrip()
        if header == b"PF":
            raise ImageFormatError(f"{path}: color PFM is not supported, expected 'Pf'")
        if header != b"Pf":
            raise ImageFormatError(f"{path}: not a PFM file (header {header[:8]!r})")
        m = _PFM_DIMS.match(fh.readline())
        if not m:
            raise ImageFormatError(f"{path}: malformed PFM dimensions line")
        width, height = int(m.group(1)), int(m.group(2))
        try:
            scale = float(fh.readline().decode("ascii").strip())
        except (UnicodeDecodeError, ValueError) as exc:
            raise ImageFormatError(f"{path}: malformed PFM scale line") from exc
        if scale == 0:
            raise ImageFormatError(f"{path}: PFM scale must be non-zero")
        dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
        buf = fh.read()
    if len(buf) < width * height * 4:
        raise ImageFormatError(f"{path}: truncated PFM data")
    data = np.frombuffer(buf, dtype=dtype, count=width * height).reshape(height, width)
    depth = np.flipud(data).astype(np.float32)
    if check:
        if not np.all(np.isfinite(depth)):
            raise InvalidDepthError(f"{path}: depth contains NaN or Inf")
        if np.any(depth <= 0):
            raise InvalidDepthError(f"{path}: depth contains non-positive values")
    return depth


def save_pfm(path, depth):
    """Write a 2-D float map as little-endian "Pf" PFM (rows bottom-to-top)."""
    d = np.asarray(depth, dtype="<f4")
    if d.ndim != 2:
        raise ValueError("PFM writer expects a 2-D array")
    H, W = d.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (W, H))
        fh.write(np.ascontiguousarray(np.flipud(d)).tobytes())
    return path


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_outputs(out_dir, result, extra_metrics=None):
    """Write the result bundle of a pipeline run into ``out_dir``.

    Files: coarse.png, fine.png, valid.png, pose.json, se2.json and, when
    the fill stage ran, filled.png, result.png, metrics.json. Returns the
    list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    def out(name):
        p = os.path.join(out_dir, name)
        paths.append(p)
        return p

    try:
        save_png(out("coarse.png"), result.align3d.coarse)
        save_png(out("fine.png"), result.fine)
        save_mask(out("valid.png"), result.valid)
        write_json(out("pose.json"), result.align3d.pose.to_dict())
        se2 = result.align2d.transform.to_dict() if result.align2d is not None else None
        if se2 is None:
            from .align2d import ScaledEuclidean2D

            se2 = ScaledEuclidean2D.identity().to_dict()
        se2["skipped"] = result.align2d is None or bool(result.align2d.skipped)
        write_json(out("se2.json"), se2)
        if result.fill_report is not None:
            save_png(out("filled.png"), result.fill_report.filled)
            save_png(out("result.png"), result.fill_report.result)
            metrics = result.metrics.to_dict()
            metrics.update(result.fill_report.scalars())
            metrics.update(extra_metrics or {})
            write_json(out("metrics.json"), metrics)
    except OSError as exc:
        raise OSError(f"failed writing outputs to {out_dir}: {exc}") from exc
    return paths
