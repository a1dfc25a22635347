import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refill3d.errors import BehindCameraError, DimensionMismatchError, InvalidDepthError
from refill3d.geometry import (
    Intrinsics,
    Pose6D,
    backproject,
    default_intrinsics,
    euler_to_rotation,
    project,
    reproject_grid,
    rotation_derivatives,
    rotation_to_euler,
    transform_point,
)

K512 = Intrinsics(750.0, 750.0, 256.0, 256.0)
angles = st.floats(-3.0, 3.0, allow_nan=False)


def test_euler_identity():
    assert np.array_equal(euler_to_rotation((0.0, 0.0, 0.0)), np.eye(3))


def test_euler_yaw_quarter_turn():
    r = euler_to_rotation((0.0, 0.0, np.pi / 2))
    np.testing.assert_allclose(r @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)


def test_euler_order_is_z_y_x():
    a, b, g = 0.3, -0.2, 0.7
    ca, sa, cb, sb, cg, sg = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(g), np.sin(g)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
    np.testing.assert_allclose(euler_to_rotation((a, b, g)), rz @ ry @ rx, atol=1e-15)


@given(angles, angles, angles)
def test_rotation_is_orthonormal(a, b, g):
    r = euler_to_rotation((a, b, g))
    np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_rotation_to_euler_roundtrip(a, b, g):
    np.testing.assert_allclose(rotation_to_euler(euler_to_rotation((a, b, g))), (a, b, g), atol=1e-9)


def test_rotation_derivatives_match_finite_differences():
    e = np.array([0.2, -0.4, 0.9])
    h = 1e-6
    for i, d in enumerate(rotation_derivatives(e)):
        ep, em = e.copy(), e.copy()
        ep[i] += h
        em[i] -= h
        fd = (euler_to_rotation(ep) - euler_to_rotation(em)) / (2 * h)
        np.testing.assert_allclose(d, fd, atol=1e-8)


def test_backproject_principal_ray():
    np.testing.assert_allclose(backproject(256, 256, 3.0, K512), [0.0, 0.0, 3.0])


def test_backproject_hand_value():
    np.testing.assert_allclose(backproject(406, 256, 3.0, K512), [0.6, 0.0, 3.0], atol=1e-15)


@pytest.mark.parametrize("z", [0.0, -1.0, np.nan])
def test_backproject_rejects_bad_depth(z):
    with pytest.raises(InvalidDepthError):
        backproject(10.0, 10.0, z, K512)


def test_transform_point_examples():
    p = np.array([0.6, 0.0, 3.0])
    np.testing.assert_array_equal(transform_point(p, Pose6D.identity()), p)
    np.testing.assert_allclose(transform_point(p, Pose6D((0, 0, 0), (0, 0, 1.5))), [0.6, 0.0, 4.5])


@settings(max_examples=50)
@given(st.tuples(angles, angles, angles), st.tuples(*[st.floats(-5, 5)] * 3), st.tuples(*[st.floats(-10, 10)] * 3))
def test_pose_inverse_roundtrip(e, t, p):
    pose = Pose6D(e, t)
    back = transform_point(transform_point(np.array(p), pose), pose.inverse())
    np.testing.assert_allclose(back, p, atol=1e-12)


def test_project_examples():
    np.testing.assert_allclose(project(np.array([0.0, 0.0, 3.0]), K512), (256.0, 256.0, 3.0))
    np.testing.assert_allclose(project(np.array([0.6, 0.0, 4.5]), K512), (356.0, 256.0, 4.5))
    with pytest.raises(BehindCameraError):
        project(np.array([0.0, 0.0, -1.0]), K512)


@given(st.floats(0, 511), st.floats(0, 511), st.floats(0.5, 10))
def test_project_inverts_backproject(u, v, z):
    pu, pv, pz = project(backproject(u, v, z, K512), K512)
    np.testing.assert_allclose((pu, pv, pz), (u, v, z), rtol=1e-12, atol=1e-9)


def test_reproject_identity():
    depth = np.random.default_rng(0).uniform(1, 5, (12, 16))
    flow = reproject_grid(depth, Pose6D.identity(), default_intrinsics(16, 12, 20.0))
    v, u = np.mgrid[0:12, 0:16]
    np.testing.assert_allclose(flow.coords[..., 0], u, atol=1e-12)
    np.testing.assert_allclose(flow.coords[..., 1], v, atol=1e-12)
    np.testing.assert_allclose(flow.depths_ref, depth)
    assert flow.valid.all()


def test_reproject_hand_chain():
    depth = np.full((512, 512), 3.0)
    flow = reproject_grid(depth, Pose6D((0, 0, 0), (0, 0, 1.5)), K512)
    np.testing.assert_allclose(flow.coords[256, 406], (356.0, 256.0))
    assert flow.valid[256, 406]
    flow = reproject_grid(depth, Pose6D((0, 0, 0), (0, 0, -1.5)), K512)
    np.testing.assert_allclose(flow.coords[256, 406], (556.0, 256.0))
    assert not flow.valid[256, 406]


def test_reproject_behind_camera_is_invalid():
    depth = np.full((8, 8), 1.0)
    flow = reproject_grid(depth, Pose6D((0, 0, 0), (0, 0, -2.0)), default_intrinsics(8, 8, 10.0))
    assert not flow.valid.any()


def test_reproject_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        reproject_grid(np.ones((4, 5)), Pose6D.identity(), default_intrinsics(5, 4, 10.0), size=(5, 5))


def test_roll_keeps_principal_point():
    k = default_intrinsics(64, 48, 50.0)
    depth = np.full((48, 64), 2.5)
    for gamma in (-2.0, 0.4, 1.3):
        flow = reproject_grid(depth, Pose6D((0, 0, gamma), (0, 0, 0)), k)
        np.testing.assert_allclose(flow.coords[24, 32], (32.0, 24.0), atol=1e-12)


def test_inverse_warp_consistency():
    # fronto-parallel plane z=4; its depth in the second camera comes from the forward step
    k = default_intrinsics(40, 30, 35.0)
    pose = Pose6D((0.02, -0.03, 0.05), (0.1, -0.05, 0.2))
    depth = np.full((30, 40), 4.0)
    fwd = reproject_grid(depth, pose, k)
    ok = fwd.valid
    v, u = np.mgrid[0:30, 0:40].astype(float)
    fu, fv = fwd.coords[..., 0][ok], fwd.coords[..., 1][ok]
    p = backproject(fu, fv, fwd.depths_ref[ok], k)
    bu, bv, bz = project(transform_point(p, pose.inverse()), k)
    np.testing.assert_allclose(bu, u[ok], atol=1e-6)
    np.testing.assert_allclose(bv, v[ok], atol=1e-6)
    np.testing.assert_allclose(bz, 4.0, atol=1e-9)
    # a second dense grid on the plane, expressed in the reference camera
    R, t = pose.rotation, np.asarray(pose.translation)
    n_ref = R @ [0.0, 0.0, 1.0]
    rays = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], -1)
    back = reproject_grid((4.0 + n_ref @ t) / (rays @ n_ref), pose.inverse(), k)
    again = reproject_grid(depth, pose, k)
    both = back.valid
    fu2 = back.coords[..., 0][both]
    fv2 = back.coords[..., 1][both]
    # landing on the plane at depth 4 in the target: consistent with the forward map
    p2 = backproject(fu2, fv2, np.full(fu2.shape, 4.0), k)
    ru, rv, _ = project(transform_point(p2, pose), k)
    np.testing.assert_allclose(ru, u[both], atol=1e-6)
    np.testing.assert_allclose(rv, v[both], atol=1e-6)
    assert np.array_equal(again.coords, fwd.coords)


def test_default_intrinsics_examples():
    assert default_intrinsics(512, 512, 750) == Intrinsics(750.0, 750.0, 256.0, 256.0)
    assert default_intrinsics(512, 512, 450) == Intrinsics(450.0, 450.0, 256.0, 256.0)
    k = default_intrinsics(100, 60, 80)
    assert (k.cx, k.cy) == (50.0, 30.0)
    assert default_intrinsics(512, 512).fx == 750.0


@pytest.mark.parametrize("args", [(0, 10, 5), (10, -1, 5), (10, 10, 0)])
def test_default_intrinsics_rejects_non_positive(args):
    with pytest.raises(ValueError):
        default_intrinsics(*args)


def test_intrinsics_rejects_bad_focal():
    with pytest.raises(ValueError):
        Intrinsics(-1.0, 1.0, 0.0, 0.0)


def test_pose_rejects_large_angle():
    with pytest.raises(ValueError):
        Pose6D((4.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def test_json_roundtrip():
    k = Intrinsics(700.5, 701.0, 255.5, 250.0)
    pose = Pose6D((0.1, -0.2, 0.3), (1.0, 2.0, -3.0))
    assert Intrinsics.from_dict(json.loads(json.dumps(k.to_dict()))) == k
    assert Pose6D.from_dict(json.loads(json.dumps(pose.to_dict()))) == pose
    assert set(pose.to_dict()) == {"euler_xyz", "translation"}
    assert set(k.to_dict()) == {"fx", "fy", "cx", "cy"}


def test_compose_matches_matrix_product():
    a = Pose6D((0.1, 0.2, -0.3), (1.0, 0.0, 0.5))
    b = Pose6D((-0.2, 0.05, 0.1), (0.0, -1.0, 0.2))
    np.testing.assert_allclose(a.compose(b).matrix, a.matrix @ b.matrix, atol=1e-12)
