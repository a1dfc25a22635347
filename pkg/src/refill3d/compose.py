"""Hole filling, seam harmonization and final compositing."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_image, check_mask, check_same_shape

GAIN_RANGE = (0.5, 2.0)
#: Ring variance below this is treated as constant (gain fixed at 1).
MIN_VARIANCE = 1e-12


@dataclass
class FillReport:
    filled: np.ndarray
    coverage: float
    harmonization_gain: np.ndarray
    harmonization_bias: np.ndarray
    harmonized: bool = True
    result: np.ndarray = field(default=None, repr=False)

    def scalars(self):
        return {
            "coverage": float(self.coverage),
            "harmonization_gain": [float(g) for g in self.harmonization_gain],
            "harmonization_bias": [float(b) for b in self.harmonization_bias],
        }


def _composite(target, hole_mask, content, name):
    target = check_image(target, "target")
    content = check_image(content, name)
    hole_mask = check_mask(hole_mask, "hole_mask")
    check_same_shape(target=target, hole_mask=hole_mask, **{name: content})
    return np.where(hole_mask[..., None], target, content)


def fill(target, hole_mask, fine):
    """``target * M + fine * (1 - M)``: known pixels come from the target, hole pixels from ``fine``."""
    return _composite(target, hole_mask, fine, "fine")


def compose_final(target, hole_mask, harmonized_fine):
    """Same masking law as :func:`fill`, applied to the harmonized content."""
    return _composite(target, hole_mask, harmonized_fine, "harmonized_fine")


def coverage(hole_mask, valid):
    """Fraction of hole pixels for which aligned content exists."""
    hole = ~check_mask(hole_mask, "hole_mask")
    valid = check_mask(valid, "valid")
    n = np.count_nonzero(hole)
    if n == 0:
        return 1.0
    return float(np.count_nonzero(hole & valid) / n)


def fit_affine(source, target):
    """Per-channel least-squares ``gain * source + bias ~ target`` over the rows of (N, C) arrays.

    The gain is clamped to [0.5, 2]; a constant ``source`` channel gets gain
    1 and bias equal to the mean difference.
    """
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    ds = source - mu_s
    var = np.mean(ds * ds, axis=0)
    cov = np.mean(ds * (target - mu_t), axis=0)
    gain = np.ones_like(mu_s)
    flat = var <= MIN_VARIANCE
    gain[~flat] = cov[~flat] / var[~flat]
    gain = np.clip(gain, *GAIN_RANGE)
    bias = mu_t - gain * mu_s
    return gain, bias


def harmonize(fine, target, hole_mask, dilated, valid):
    """Match the brightness of ``fine`` to the target on the ring around the hole.

    Returns ``(harmonized, gain, bias, ok)``; ``ok`` is False when the ring
    holds no valid pixels, in which case gain is 1, bias 0 and ``fine`` is
    returned unchanged. Invalid pixels stay black.
    """
    fine = check_image(fine, "fine")
    target = check_image(target, "target")
    hole_mask = check_mask(hole_mask, "hole_mask")
    dilated = check_mask(dilated, "dilated")
    valid = check_mask(valid, "valid")
    check_same_shape(fine=fine, target=target, hole_mask=hole_mask, dilated=dilated, valid=valid)
    C = fine.shape[2]
    ring = ~dilated & hole_mask & valid
    if not ring.any():
        return fine.copy(), np.ones(C), np.zeros(C), False
    gain, bias = fit_affine(fine[ring], target[ring])
    out = np.zeros_like(fine)
    out[valid] = np.clip(fine[valid] * gain + bias, 0.0, 1.0)
    return out, gain, bias, True
