"""End-to-end transfer plumbing shared by the CLI and the HTTP service.

Stage 1 produces an alpha mask on the warped reference; stage 2 composites it
over the target and optionally refines the composite with a trained
generator. Both stages also run standalone, and composing them through an
intermediate mask file reproduces the single-shot path exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import classical
from .extractor import PatchExtractor, extract_mask
from .gan import Generator, generate
from .geometry import LandmarkSet, build_warp, region_encoding, skin_mask, warp_image, warp_mask
from .imaging import alpha_composite, as_image, as_mask

EXTRACT_METHODS = ("bagnet", "gmm", "chroma", "residual")


def warp_reference(target_shape, target_lms: LandmarkSet, ref_img, ref_lms: LandmarkSet):
    """Align the reference image with the target geometry. Returns
    (warped image of target_shape, the warp)."""
    warp = build_warp(ref_lms, target_lms, target_shape[:2])
    return warp_image(warp, as_image(ref_img)), warp


def _face_hull_mask(lms: LandmarkSet, h, w) -> np.ndarray:
    enc = region_encoding(lms, h, w)
    return np.clip(enc.lips + enc.eyes + enc.skin, 0.0, 1.0)


def gaussian_translator(sigma=3.0):
    """Crude makeup remover for the residual baseline: heavy blur pulls
    saturated strokes toward the local skin tone."""
    from skimage.filters import gaussian

    def translate(img):
        return gaussian(img, sigma=sigma, channel_axis=2, preserve_range=True).astype(np.float32)

    return translate


def extract_stage(
    method,
    img,
    lms: LandmarkSet,
    model: PatchExtractor = None,
    gmm_model: classical.SkinColorModel = None,
    percentile=10.0,
    hue_band=30.0,
    sat_band=0.25,
    residual_threshold=0.12,
    residual_sigma=3.0,
    gmm_components=3,
    seed=0,
) -> np.ndarray:
    """Run one extraction method on an image with known landmarks.

    bagnet needs a trained model. gmm fits on the image's own skin region
    unless a fitted model is supplied; gmm and chroma flag within the face
    hull only, since their statistics say nothing about the background.
    """
    img = as_image(img)
    h, w = img.shape[:2]
    if method == "bagnet":
        if model is None:
            raise ValueError("bagnet extraction needs a trained extractor model")
        return extract_mask(model, img, region_encoding(lms, h, w))
    if method == "gmm":
        hull = _face_hull_mask(lms, h, w)
        if gmm_model is None:
            gmm_model = classical.fit_skin_gmm([img], [skin_mask(img, lms)], K=gmm_components, seed=seed)
        return classical.gmm_makeup_mask(img, gmm_model, percentile, within=hull)
    if method == "chroma":
        hull = _face_hull_mask(lms, h, w)
        return classical.chroma_deviation_mask(img, skin_mask(img, lms), hue_band, sat_band, within=hull)
    if method == "residual":
        return classical.residual_mask(img, gaussian_translator(residual_sigma), residual_threshold)
    raise ValueError(f"unknown extraction method {method!r}; choose from {EXTRACT_METHODS}")


def apply_stage(target, warped_ref, mask, generator: Generator = None) -> np.ndarray:
    """Composite the warped reference over the target through the mask and,
    when a generator is given, refine the result with it."""
    target = as_image(target)
    warped_ref = as_image(warped_ref)
    mask = as_mask(mask)
    if generator is None:
        return alpha_composite(target, warped_ref, mask)
    with torch.no_grad():
        est = generate(generator, target, mask, warped_ref)
    return np.ascontiguousarray(est[0].permute(1, 2, 0).numpy().astype(np.float32))


@dataclass
class TransferResult:
    mask: np.ndarray
    warped_ref: np.ndarray
    result: np.ndarray


def transfer(
    target,
    target_lms: LandmarkSet,
    ref,
    ref_lms: LandmarkSet,
    method="bagnet",
    model: PatchExtractor = None,
    generator: Generator = None,
    mask_override=None,
    pre_warp_extract=False,
    **extract_params,
) -> TransferResult:
    """Full pipeline: warp, extract (or take an override mask), apply.

    By default the mask is extracted from the warped reference in target
    coordinates; pre_warp_extract extracts on the raw reference and warps the
    mask instead.
    """
    target = as_image(target)
    wref, warp = warp_reference(target.shape, target_lms, as_image(ref), ref_lms)
    if mask_override is not None:
        mask = as_mask(mask_override)
        if mask.shape != target.shape[:2]:
            raise ValueError("override mask dims do not match target")
    elif pre_warp_extract:
        raw = extract_stage(method, as_image(ref), ref_lms, model=model, **extract_params)
        mask = warp_mask(warp, raw)
    else:
        mask = extract_stage(method, wref, target_lms, model=model, **extract_params)
    result = apply_stage(target, wref, mask, generator=generator)
    return TransferResult(mask=mask, warped_ref=wref, result=result)
