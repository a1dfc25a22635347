import numpy as np
import pytest
from sklearn.base import clone

from helpers import ellipse_known, smooth_texture, wide_intrinsics
from refill3d.align2d import ring_loss_2d, ScaledEuclidean2D
from refill3d.errors import DimensionMismatchError, InvalidDepthError
from refill3d.metrics import psnr
from refill3d.pipeline import PipelineOptions, ReferenceInpainter, run_pipeline
from refill3d.synth import random_pair

S = 64
K = wide_intrinsics(S)
KNOWN = ellipse_known(S, S)


@pytest.fixture(scope="module")
def pairs():
    rng = np.random.default_rng(21)
    return [random_pair(rng, K, (S, S), valid_band=(0.6, 0.8))[:3] for _ in range(4)]


def _run(v1, v2, **opts):
    return run_pipeline(v1.image * KNOWN[..., None], KNOWN, v2.image, v1.depth, K, PipelineOptions(**opts), v1.image)


def test_full_coverage_reaches_30db(pairs):
    covered = 0
    for v1, v2, _ in pairs:
        res = _run(v1, v2)
        if res.fill_report.coverage == 1.0:
            covered += 1
            assert res.metrics.masked_psnr >= 30.0
    assert covered > 0


def test_no_hole_identity_pair_is_pass_through():
    img = smooth_texture(S, S)
    known = np.ones((S, S), bool)
    res = run_pipeline(img, known, img, np.full((S, S), 2.0), K)
    assert np.array_equal(res.result, img)
    assert res.align2d.skipped


def test_stage_order(pairs):
    v1, v2, _ = pairs[0]
    assert _run(v1, v2).stages == ["align3d", "align2d", "fill", "harmonize", "compose"]
    assert _run(v1, v2, skip_2d=True, skip_harmonize=True).stages == ["align3d", "fill", "compose"]


def test_disabling_3d_never_helps(pairs):
    for v1, v2, _ in pairs:
        assert _run(v1, v2).metrics.masked_psnr >= _run(v1, v2, skip_3d=True).metrics.masked_psnr


def test_2d_stage_never_raises_ring_loss(pairs):
    for v1, v2, _ in pairs:
        res = _run(v1, v2)
        a2 = res.align2d
        args = (v1.image * KNOWN[..., None], KNOWN, a2.dilated, res.align3d.coarse, res.align3d.valid)
        assert ring_loss_2d(a2.transform, *args) <= ring_loss_2d(ScaledEuclidean2D(), *args)


def test_without_alignment_fills_with_raw_reference(pairs):
    v1, v2, _ = pairs[0]
    res = _run(v1, v2, skip_3d=True, skip_2d=True, skip_harmonize=True)
    assert np.array_equal(res.result[~KNOWN], v2.image[~KNOWN])
    assert np.array_equal(res.result[KNOWN], v1.image[KNOWN])


def test_known_pixels_always_kept(pairs):
    v1, v2, _ = pairs[1]
    res = _run(v1, v2)
    assert np.array_equal(res.result[KNOWN], v1.image[KNOWN])


def test_panels_carry_intermediates(pairs):
    v1, v2, _ = pairs[0]
    res = _run(v1, v2)
    panels = res.panels(v1.image, v2.image)
    assert set(panels) == {"target", "reference", "coarse", "fine", "result"}
    assert all(p.shape == (S, S, 3) for p in panels.values())


def test_errors_carry_stage_label():
    img = smooth_texture(S, S)
    with pytest.raises(InvalidDepthError):
        run_pipeline(img, KNOWN, img, np.zeros((S, S)), K)
    with pytest.raises(DimensionMismatchError):
        run_pipeline(img, KNOWN, img[:-1], np.ones((S, S)), K)
    from refill3d.errors import AlignmentFailedError

    with pytest.raises(AlignmentFailedError, match=r"^\[align3d\]"):
        run_pipeline(img, np.zeros((S, S), bool), img, np.ones((S, S)), K)


def test_deterministic(pairs):
    v1, v2, _ = pairs[2]
    a, b = _run(v1, v2), _run(v1, v2)
    assert np.array_equal(a.result, b.result) and a.metrics == b.metrics


def test_estimator_api(pairs):
    v1, v2, _ = pairs[3]
    est = ReferenceInpainter(focal=S / 2, skip_harmonize=True)
    assert clone(est).get_params()["skip_harmonize"] is True
    out = est.fit_transform(v1.image * KNOWN[..., None], KNOWN, v2.image, v1.depth)
    assert out.shape == (S, S, 3)
    assert est.score(v1.image, KNOWN) == psnr(out, v1.image, ~KNOWN)
    assert est.transform_2d_ is not None
