import numpy as np
import pytest

from makeuplab.extractor import ExtractorConfig, build_extractor
from makeuplab.gan import GeneratorConfig, build_generator
from makeuplab.imaging import alpha_composite
from makeuplab.pipeline import (
    EXTRACT_METHODS,
    apply_stage,
    extract_stage,
    transfer,
    warp_reference,
)


@pytest.fixture(scope="module")
def extractor():
    return build_extractor(ExtractorConfig(seed=0))


def test_warp_reference_shapes(face_pair):
    target = face_pair["plain"]
    wref, warp = warp_reference(target.shape, face_pair["plain_lms"],
                                face_pair["made"], face_pair["made_lms"])
    assert wref.shape == target.shape
    assert warp.shape == target.shape[:2]
    assert wref.dtype == np.float32


def test_extract_stage_all_methods_run(face_pair, extractor):
    img = face_pair["made"]
    lms = face_pair["made_lms"]
    for method in EXTRACT_METHODS:
        mask = extract_stage(method, img, lms, model=extractor)
        assert mask.shape == img.shape[:2]
        assert mask.dtype == np.float32
        assert mask.min() >= 0.0 and mask.max() <= 1.0


def test_extract_stage_bagnet_needs_model(face_pair):
    with pytest.raises(ValueError):
        extract_stage("bagnet", face_pair["made"], face_pair["made_lms"])


def test_extract_stage_unknown_method(face_pair, extractor):
    with pytest.raises(ValueError):
        extract_stage("psychic", face_pair["made"], face_pair["made_lms"], model=extractor)


def test_flat_masks_stay_inside_face_hull(face_pair, extractor):
    """gmm and chroma only score the face; background must stay clear."""
    img = face_pair["made"]
    lms = face_pair["made_lms"]
    corner = np.zeros(img.shape[:2], dtype=bool)
    corner[:4, :4] = True
    for method in ("gmm", "chroma"):
        mask = extract_stage(method, img, lms, model=extractor)
        assert mask[corner].max() == 0.0


def test_apply_stage_without_generator_is_alpha_composite(face_pair, rng):
    target = face_pair["plain"]
    wref = face_pair["made"]
    mask = rng.random(target.shape[:2]).astype(np.float32)
    out = apply_stage(target, wref, mask)
    np.testing.assert_array_equal(out, alpha_composite(target, wref, mask))


def test_apply_stage_with_generator(face_pair, rng):
    G = build_generator(GeneratorConfig(base_width=8, global_blocks=1, enhancer_blocks=1))
    target = face_pair["plain"]
    mask = rng.random(target.shape[:2]).astype(np.float32)
    out = apply_stage(target, face_pair["made"], mask, generator=G)
    assert out.shape == target.shape
    assert out.dtype == np.float32
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_transfer_override_bypasses_extraction(face_pair, rng):
    """With a caller mask and no generator the pipeline is pure compositing."""
    target = face_pair["plain"]
    mask = rng.random(target.shape[:2]).astype(np.float32)
    res = transfer(target, face_pair["plain_lms"],
                   face_pair["made"], face_pair["made_lms"],
                   mask_override=mask)
    np.testing.assert_array_equal(res.mask, mask)
    np.testing.assert_array_equal(res.result, alpha_composite(target, res.warped_ref, mask))


def test_transfer_override_dim_check(face_pair):
    bad = np.zeros((10, 10), dtype=np.float32)
    with pytest.raises(ValueError):
        transfer(face_pair["plain"], face_pair["plain_lms"],
                 face_pair["made"], face_pair["made_lms"],
                 mask_override=bad)


def test_transfer_post_warp_default(face_pair, extractor):
    res = transfer(face_pair["plain"], face_pair["plain_lms"],
                   face_pair["made"], face_pair["made_lms"],
                   method="bagnet", model=extractor)
    target = face_pair["plain"]
    assert res.mask.shape == target.shape[:2]
    assert res.warped_ref.shape == target.shape
    assert res.result.shape == target.shape
    np.testing.assert_array_equal(res.result, alpha_composite(target, res.warped_ref, res.mask))


def test_transfer_pre_warp_extract(face_pair, extractor):
    res = transfer(face_pair["plain"], face_pair["plain_lms"],
                   face_pair["made"], face_pair["made_lms"],
                   method="bagnet", model=extractor, pre_warp_extract=True)
    post = transfer(face_pair["plain"], face_pair["plain_lms"],
                    face_pair["made"], face_pair["made_lms"],
                    method="bagnet", model=extractor)
    assert res.mask.shape == post.mask.shape
    # extracting before vs after the warp is a genuinely different path
    assert not np.array_equal(res.mask, post.mask)


def test_extract_stage_chroma_params_thread_through(face_pair, extractor):
    loose = extract_stage("chroma", face_pair["made"], face_pair["made_lms"],
                          hue_band=1.0, sat_band=0.01)
    tight = extract_stage("chroma", face_pair["made"], face_pair["made_lms"],
                          hue_band=180.0, sat_band=5.0)
    assert loose.sum() > tight.sum()
    assert tight.sum() == 0.0
