import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from refill3d.errors import DimensionMismatchError, OutOfBoundsError
from refill3d.geometry import PixelFlow
from refill3d.sampler import (
    bilinear_sample,
    bilinear_sample_grad,
    dilate_mask,
    scaled_radius,
    warp_image,
)

SQUARE = np.array([[0.0, 1.0], [2.0, 3.0]])


def test_center_of_2x2():
    assert bilinear_sample(SQUARE, 0.5, 0.5)[0] == 1.5


def test_corner_node():
    assert bilinear_sample(SQUARE, 1.0, 0.0)[0] == 1.0


@given(arrays(np.float64, (5, 6, 3), elements=st.floats(0, 1)), st.integers(0, 5), st.integers(0, 4))
def test_grid_nodes_are_exact(img, i, j):
    assert np.array_equal(bilinear_sample(img, float(i), float(j)), img[j, i])


def test_out_of_bounds():
    with pytest.raises(OutOfBoundsError):
        bilinear_sample(SQUARE, 1.5, 0.0)
    with pytest.raises(OutOfBoundsError):
        bilinear_sample(SQUARE, 0.0, -0.1)


def test_linear_along_grid_segment():
    img = np.random.default_rng(1).uniform(size=(4, 4, 1))
    for t in np.linspace(0, 1, 7):
        expect = (1 - t) * img[2, 1] + t * img[2, 2]
        np.testing.assert_allclose(bilinear_sample(img, 1 + t, 2.0), expect, atol=1e-15)


def test_gradient_hand_value():
    _, du, dv = bilinear_sample_grad(SQUARE, 0.5, 0.5)
    assert du[0] == 1.0 and dv[0] == 2.0


def test_gradient_of_constant_is_zero():
    img = np.full((5, 5, 3), 0.4)
    _, du, dv = bilinear_sample_grad(img, 2.3, 1.7)
    assert not du.any() and not dv.any()


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    img = rng.uniform(size=(9, 11, 3))
    h = 1e-4
    for _ in range(200):
        u, v = rng.uniform(0.05, 9.95), rng.uniform(0.05, 7.95)
        # stay clear of grid lines so the central difference does not straddle a kink
        if min(abs(u - round(u)), abs(v - round(v))) < 2 * h:
            continue
        _, du, dv = bilinear_sample_grad(img, u, v)
        fd_u = (bilinear_sample(img, u + h, v) - bilinear_sample(img, u - h, v)) / (2 * h)
        fd_v = (bilinear_sample(img, u, v + h) - bilinear_sample(img, u, v - h)) / (2 * h)
        np.testing.assert_allclose(du, fd_u, atol=1e-6)
        np.testing.assert_allclose(dv, fd_v, atol=1e-6)


def test_gradient_on_grid_line_is_mean_of_one_sided_slopes():
    img = np.array([[0.0, 1.0, 5.0]])
    _, du, _ = bilinear_sample_grad(img[..., None].repeat(2, 0), 1.0, 0.0)
    assert du[0] == 2.5


def _identity_flow(h, w):
    v, u = np.mgrid[0:h, 0:w].astype(float)
    return PixelFlow(np.stack([u, v], -1), np.ones((h, w)), np.ones((h, w), bool))


def test_identity_warp_is_exact():
    ref = np.random.default_rng(3).uniform(size=(6, 7, 3))
    out, valid = warp_image(ref, _identity_flow(6, 7))
    assert np.array_equal(out, ref) and valid.all()


def test_shift_warp_on_ramp():
    ramp = np.tile(np.arange(4.0) / 3, (4, 1))[..., None]
    flow = _identity_flow(4, 4)
    flow.coords[..., 0] += 1.0
    flow.valid[:, 3] = False
    out, valid = warp_image(ramp, flow)
    np.testing.assert_allclose(out[:, :3, 0], ramp[:, 1:, 0])
    assert not out[:, 3].any() and np.array_equal(valid, flow.valid)


def test_fully_invalid_flow():
    flow = _identity_flow(3, 3)
    flow.valid[:] = False
    out, valid = warp_image(np.ones((3, 3, 3)), flow)
    assert not out.any() and not valid.any()


def test_warp_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        warp_image(np.ones((3, 4, 1)), _identity_flow(3, 3))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_warp_stays_within_reference_range(seed):
    rng = np.random.default_rng(seed)
    ref = rng.uniform(0.2, 0.7, size=(8, 8, 1))
    flow = _identity_flow(8, 8)
    flow.coords[:] = rng.uniform(0, 7, size=(8, 8, 2))
    out, _ = warp_image(ref, flow)
    assert out.min() >= ref.min() - 1e-15 and out.max() <= ref.max() + 1e-15


def _brute_force_dilate(m, r):
    h, w = m.shape
    holes = np.argwhere(~m)
    out = np.ones_like(m)
    for j in range(h):
        for i in range(w):
            if holes.size and np.min(np.hypot(holes[:, 0] - j, holes[:, 1] - i)) <= r:
                out[j, i] = False
    return out


def test_dilate_radius_zero_is_identity():
    m = np.random.default_rng(4).uniform(size=(6, 6)) > 0.3
    assert np.array_equal(dilate_mask(m, 0), m)


def test_dilate_single_pixel_disk():
    m = np.ones((9, 9), bool)
    m[4, 4] = False
    v, u = np.mgrid[0:9, 0:9]
    assert np.array_equal(dilate_mask(m, 2), np.hypot(u - 4, v - 4) > 2)


def test_dilate_all_known():
    assert dilate_mask(np.ones((5, 5), bool), 3).all()


@settings(max_examples=25)
@given(arrays(bool, (10, 12), elements=st.booleans()), st.floats(0, 4))
def test_dilate_matches_brute_force(m, r):
    assert np.array_equal(dilate_mask(m, r), _brute_force_dilate(m, r))


@settings(max_examples=25)
@given(arrays(bool, (10, 10), elements=st.booleans()), st.floats(0, 3), st.floats(0, 3))
def test_dilate_is_monotone(m, r1, r2):
    lo, hi = sorted((r1, r2))
    assert not np.any(dilate_mask(m, hi) & ~dilate_mask(m, lo))


def test_dilate_negative_radius():
    with pytest.raises(ValueError):
        dilate_mask(np.ones((3, 3), bool), -1)


def test_scaled_radius():
    assert scaled_radius(512, 512) == 15
    assert scaled_radius(256, 256) == 8
    assert scaled_radius(1024, 2048) == 30
