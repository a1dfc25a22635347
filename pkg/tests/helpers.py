"""Shared fixtures for building synthetic test inputs."""

import numpy as np

from refill3d.geometry import default_intrinsics


def ellipse_known(height, width, cx=0.55, cy=0.45, rx=0.18, ry=0.22):
    """Known-pixel mask with an elliptical hole; centers and radii are fractions of the frame."""
    v, u = np.mgrid[0:height, 0:width]
    return ((u - cx * width) / (rx * width)) ** 2 + ((v - cy * height) / (ry * height)) ** 2 > 1


def quantize8(img):
    """Round to 8-bit levels, as a PNG round trip would."""
    return np.round(np.clip(img, 0, 1) * 255.0) / 255.0


def wide_intrinsics(size):
    """Focal of half the width: a ~90 degree field of view."""
    return default_intrinsics(size, size, size / 2)


def smooth_texture(height, width, seed=0, channels=3):
    """Smooth random color field built from a handful of sinusoids."""
    rng = np.random.default_rng(seed)
    v, u = np.mgrid[0:height, 0:width].astype(float)
    out = np.full((height, width, channels), 0.5)
    for period, amp in ((0.7, 0.15), (0.3, 0.08), (0.12, 0.04)):
        for c in range(channels):
            for _ in range(2):
                ang = rng.uniform(0, np.pi)
                kx, ky = 2 * np.pi / (period * width) * np.cos(ang), 2 * np.pi / (period * width) * np.sin(ang)
                out[..., c] += amp * np.sin(kx * u + ky * v + rng.uniform(0, 2 * np.pi))
    return np.clip(out, 0, 1)


def random_waves(rng, channels=3, periods=((90, 0.15), (35, 0.08), (12, 0.03))):
    """Random sinusoid parameters ``(kx, ky, phase, amplitude, channel)``; periods in pixels."""
    waves = []
    for period, amp in periods:
        for c in range(channels):
            for _ in range(2):
                ang = rng.uniform(0, np.pi)
                k = 2 * np.pi / period
                waves.append((k * np.cos(ang), k * np.sin(ang), rng.uniform(0, 2 * np.pi), amp, c))
    return waves


def eval_waves(waves, u, v, channels=3):
    """Evaluate the analytic texture at continuous coordinates."""
    out = np.full(np.shape(u) + (channels,), 0.5)
    for kx, ky, phase, amp, c in waves:
        out[..., c] += amp * np.sin(kx * u + ky * v + phase)
    return out
