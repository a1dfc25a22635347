"""Image quality metrics and the dataset filters based on overlap and hole size."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from ._validation import check_image, check_mask, check_same_shape

PSNR_CAP = 99.0
VALID_RATIO_BAND = (0.60, 0.80)
SMALL_MASK_BAND = (0.05, 0.15)
LARGE_MASK_BAND = (0.15, 0.30)


@dataclass
class MetricsReport:
    psnr: float = None
    ssim: float = None
    masked_psnr: float = None
    valid_ratio: float = None
    coverage: float = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def psnr(a, b, region=None):
    """Peak signal-to-noise ratio in dB for images in [0, 1].

    ``region`` restricts the error to pixels where it is 1. Zero error is
    reported as 99 dB.
    """
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if region is None:
        diff = a - b
    else:
        region = check_mask(region, "region")
        check_same_shape(a=a, region=region)
        if not region.any():
            raise ValueError("PSNR region is empty")
        diff = a[region] - b[region]
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(img, w):
    """Separable correlation keeping only fully-overlapping window positions."""
    r = len(w) // 2
    out = correlate1d(img, w, axis=0, mode="constant")
    out = correlate1d(out, w, axis=1, mode="constant")
    return out[r:-r, r:-r] if r else out


def ssim(a, b, win_size=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Single-scale SSIM with a Gaussian window, averaged over positions and channels."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < win_size:
        raise ValueError(f"images must be at least {win_size} pixels on each side")
    w = _gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    vals = []
    for ch in range(a.shape[2]):
        x = a[..., ch]
        y = b[..., ch]
        mx = _filter_valid(x, w)
        my = _filter_valid(y, w)
        sxx = _filter_valid(x * x, w) - mx * mx
        syy = _filter_valid(y * y, w) - my * my
        sxy = _filter_valid(x * y, w) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def valid_ratio(valid):
    return float(np.mean(check_mask(valid, "valid")))


def in_valid_band(ratio, band=VALID_RATIO_BAND):
    """Dataset filter: keep pairs whose overlap ratio lies in [0.60, 0.80] inclusive."""
    return band[0] <= ratio <= band[1]


def mask_area_class(hole_mask):
    """``"small"`` for 5-15% hole, ``"large"`` for (15, 30]%, otherwise ``"out-of-band"``."""
    known = check_mask(hole_mask, "hole_mask")
    # count holes directly; 1 - mean(known) drifts off the band edges
    frac = np.count_nonzero(~known) / known.size
    if SMALL_MASK_BAND[0] <= frac <= SMALL_MASK_BAND[1]:
        return "small"
    if LARGE_MASK_BAND[0] < frac <= LARGE_MASK_BAND[1]:
        return "large"
    return "out-of-band"


def evaluate(prediction, ground_truth, hole_mask=None, valid=None, coverage=None):
    """Build a :class:`MetricsReport`; ``masked_psnr`` is over the hole when a mask is given."""
    report = MetricsReport(psnr=psnr(prediction, ground_truth), ssim=ssim(prediction, ground_truth))
    if hole_mask is not None:
        hole = ~check_mask(hole_mask, "hole_mask")
        if hole.any():
            report.masked_psnr = psnr(prediction, ground_truth, hole)
    if valid is not None:
        report.valid_ratio = valid_ratio(valid)
    if coverage is not None:
        report.coverage = float(coverage)
    return report
