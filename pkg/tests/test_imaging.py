import numpy as np
import pytest

from makeuplab.imaging import (
    REGION_NAMES,
    RegionSelection,
    alpha_composite,
    as_image,
    as_mask,
    color_offset,
    load_image,
    load_mask,
    mask_combine,
    mask_erase,
    mask_scale,
    poisson_blend,
    quantize_mask,
    save_image,
    save_mask,
)


def test_as_image_rejects_bad_shapes():
    with pytest.raises(ValueError):
        as_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        as_image(np.zeros((4, 4, 4)))


def test_as_image_rejects_bad_values():
    img = np.zeros((2, 2, 3), dtype=np.float32)
    img[0, 0, 0] = 1.5
    with pytest.raises(ValueError):
        as_image(img)
    img[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        as_image(img)


def test_as_mask_rejects_bad_inputs():
    with pytest.raises(ValueError):
        as_mask(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        as_mask(np.full((2, 2), -0.1))


def test_image_file_round_trip(tmp_path, rng):
    img = quantize_img = np.round(rng.random((9, 7, 3)) * 255) / 255
    quantize_img = quantize_img.astype(np.float32)
    path = tmp_path / "img.png"
    save_image(quantize_img, path)
    back = load_image(path)
    np.testing.assert_array_equal(back, quantize_img)


def test_mask_file_round_trip(tmp_path, rng):
    mask = (np.round(rng.random((6, 8)) * 255) / 255).astype(np.float32)
    path = tmp_path / "m.png"
    save_mask(mask, path)
    np.testing.assert_array_equal(load_mask(path), mask)


def test_load_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")
    with pytest.raises(FileNotFoundError):
        load_mask(tmp_path / "nope.png")


def test_quantize_mask_matches_file_round_trip(tmp_path, small_mask):
    path = tmp_path / "q.png"
    save_mask(small_mask, path)
    np.testing.assert_array_equal(quantize_mask(small_mask), load_mask(path))


def test_alpha_composite_zero_mask_is_target(small_image, rng):
    ref = rng.random(small_image.shape).astype(np.float32)
    out = alpha_composite(small_image, ref, np.zeros(small_image.shape[:2]))
    np.testing.assert_array_equal(out, small_image)


def test_alpha_composite_one_mask_is_reference(small_image, rng):
    ref = rng.random(small_image.shape).astype(np.float32)
    out = alpha_composite(small_image, ref, np.ones(small_image.shape[:2]))
    np.testing.assert_array_equal(out, ref)


def test_alpha_composite_half_mask_hand_value():
    # 0.5 * 0.8 + 0.5 * 0.2 = 0.5
    target = np.full((1, 1, 3), 0.2, dtype=np.float32)
    ref = np.full((1, 1, 3), 0.8, dtype=np.float32)
    out = alpha_composite(target, ref, np.full((1, 1), 0.5))
    np.testing.assert_allclose(out, 0.5, atol=1e-7)


def test_alpha_composite_dim_mismatch():
    with pytest.raises(ValueError):
        alpha_composite(np.zeros((3, 3, 3)), np.zeros((4, 4, 3)), np.zeros((3, 3)))


def test_color_offset_hand_value():
    img = np.full((2, 2, 3), 0.4, dtype=np.float32)
    mask = np.array([[1.0, 0.0], [0.5, 0.0]], dtype=np.float32)
    out = color_offset(img, mask, (0.2, -0.2, 0.0))
    np.testing.assert_allclose(out[0, 0], [0.6, 0.2, 0.4], atol=1e-7)
    np.testing.assert_allclose(out[1, 0], [0.5, 0.3, 0.4], atol=1e-7)
    np.testing.assert_array_equal(out[0, 1], img[0, 1])


def test_color_offset_clamps():
    img = np.full((1, 1, 3), 0.9, dtype=np.float32)
    out = color_offset(img, np.ones((1, 1)), (0.5, -1.0, 0.0))
    np.testing.assert_allclose(out[0, 0], [1.0, 0.0, 0.9], atol=1e-7)


def test_color_offset_rejects_large_offset():
    with pytest.raises(ValueError):
        color_offset(np.zeros((1, 1, 3)), np.zeros((1, 1)), (1.5, 0, 0))


def test_region_selection_unknown_region():
    with pytest.raises(ValueError):
        RegionSelection.of("nose")


def test_region_selection_union_and_freehand():
    region_map = {name: np.zeros((2, 2), dtype=np.float32) for name in REGION_NAMES}
    region_map["lips"][0, 0] = 1.0
    region_map["eyes"][1, 1] = 1.0
    fh = np.zeros((2, 2), dtype=bool)
    fh[0, 1] = True
    sel = RegionSelection.of("lips", "eyes", freehand=fh)
    got = sel.pixel_mask(region_map)
    np.testing.assert_array_equal(got, [[True, True], [False, True]])


def test_region_selection_missing_layer():
    sel = RegionSelection.of("lips")
    with pytest.raises(ValueError):
        sel.pixel_mask({"eyes": np.zeros((2, 2))})


def test_mask_combine_hand_case():
    region_map = {name: np.zeros((2, 2), dtype=np.float32) for name in REGION_NAMES}
    region_map["lips"][:, 0] = 1.0
    region_map["skin"][:, 1] = 1.0
    a = np.array([[0.8, 0.3], [0.2, 0.9]], dtype=np.float32)
    b = np.array([[0.5, 0.6], [0.7, 0.1]], dtype=np.float32)
    out = mask_combine(
        [
            (a, RegionSelection.of("lips"), region_map),
            (b, RegionSelection.of("lips", "skin"), region_map),
        ]
    )
    # column 0 takes max(a, b), column 1 only b
    np.testing.assert_allclose(out, [[0.8, 0.6], [0.7, 0.1]], atol=1e-7)


def test_mask_combine_restricts_to_selection():
    region_map = {name: np.zeros((2, 2), dtype=np.float32) for name in REGION_NAMES}
    region_map["lips"][0, 0] = 1.0
    out = mask_combine([(np.ones((2, 2), dtype=np.float32), RegionSelection.of("lips"), region_map)])
    assert out[0, 0] == 1.0
    assert out.sum() == 1.0


def test_mask_combine_empty_raises():
    with pytest.raises(ValueError):
        mask_combine([])


def test_mask_erase_zeroes_selection():
    region_map = {name: np.zeros((2, 2), dtype=np.float32) for name in REGION_NAMES}
    region_map["eyes"][0, :] = 1.0
    mask = np.full((2, 2), 0.7, dtype=np.float32)
    out = mask_erase(mask, RegionSelection.of("eyes"), region_map)
    np.testing.assert_allclose(out, [[0.0, 0.0], [0.7, 0.7]], atol=1e-7)


def test_mask_scale_clamps_and_validates():
    mask = np.array([[0.4, 0.8]], dtype=np.float32)
    np.testing.assert_allclose(mask_scale(mask, 2.0), [[0.8, 1.0]], atol=1e-7)
    with pytest.raises(ValueError):
        mask_scale(mask, -1.0)


# ---------------------------------------------------------------------------
# poisson blending


def _interior_region(h, w):
    region = np.zeros((h, w), dtype=np.float32)
    region[1 : h - 1, 1 : w - 1] = 1.0
    return region


def test_poisson_blend_empty_region_returns_dst(rng):
    src = rng.random((5, 5, 3)).astype(np.float32)
    dst = rng.random((5, 5, 3)).astype(np.float32)
    out = poisson_blend(src, dst, np.zeros((5, 5)))
    np.testing.assert_array_equal(out, dst)


def test_poisson_blend_boundary_is_destination(rng):
    src = rng.random((9, 9, 3)).astype(np.float32)
    dst = rng.random((9, 9, 3)).astype(np.float32)
    region = np.zeros((9, 9), dtype=np.float32)
    region[3:6, 3:6] = 1.0
    out = poisson_blend(src, dst, region)
    outside = region == 0.0
    np.testing.assert_array_equal(out[outside], dst[outside])


def test_poisson_blend_identical_images_fixed_point(rng):
    img = rng.random((7, 7, 3)).astype(np.float32)
    out = poisson_blend(img, img, _interior_region(7, 7))
    np.testing.assert_allclose(out, img, atol=1e-6)


def test_poisson_blend_matches_dense_solve(rng):
    """5x5 instance against a hand-assembled dense Poisson system."""
    src = rng.random((5, 5)).astype(np.float64)
    dst = rng.random((5, 5)).astype(np.float64)
    region = _interior_region(5, 5)

    inside = region > 0.5
    ys, xs = np.nonzero(inside)
    n = len(ys)
    index = {(y, x): k for k, (y, x) in enumerate(zip(ys, xs))}
    a = np.zeros((n, n))
    b = np.zeros(n)
    for k, (y, x) in enumerate(zip(ys, xs)):
        a[k, k] = 4.0
        b[k] = 4.0 * src[y, x] - src[y - 1, x] - src[y + 1, x] - src[y, x - 1] - src[y, x + 1]
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if (ny, nx) in index:
                a[k, index[(ny, nx)]] = -1.0
            else:
                b[k] += dst[ny, nx]
    expected = np.clip(np.linalg.solve(a, b), 0.0, 1.0)

    out = poisson_blend(src, dst, region)
    np.testing.assert_allclose(out[inside], expected, atol=1e-6)


def test_poisson_blend_region_touching_border_raises(rng):
    src = rng.random((5, 5, 3)).astype(np.float32)
    region = np.zeros((5, 5), dtype=np.float32)
    region[0, 2] = 1.0
    with pytest.raises(ValueError):
        poisson_blend(src, src, region)


def test_poisson_blend_rejects_soft_region(rng):
    src = rng.random((5, 5, 3)).astype(np.float32)
    region = np.zeros((5, 5), dtype=np.float32)
    region[2, 2] = 0.5
    with pytest.raises(ValueError):
        poisson_blend(src, src, region)


def test_poisson_blend_grayscale_shape():
    src = np.full((5, 5), 0.25, dtype=np.float32)
    dst = np.full((5, 5), 0.75, dtype=np.float32)
    out = poisson_blend(src, dst, _interior_region(5, 5))
    assert out.shape == (5, 5)
    # constant src has zero Laplacian, so the interior is the harmonic
    # interpolant of the constant boundary: dst everywhere
    np.testing.assert_allclose(out, dst, atol=1e-6)
