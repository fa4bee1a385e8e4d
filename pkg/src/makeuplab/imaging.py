"""Image/mask substrate: file I/O, compositing, mask algebra, Poisson blending.

Conventions used across the package:
  * images are float32 numpy arrays of shape (H, W, 3) with values in [0, 1]
  * alpha masks are float32 numpy arrays of shape (H, W) with values in [0, 1]
  * binary masks are alpha masks whose values are exactly 0.0 or 1.0

Files are 8-bit: RGB rasters for images, single-channel grayscale for masks
(value/255 is the alpha).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from PIL import Image
from scipy.sparse.linalg import cg

REGION_NAMES = ("lips", "eyes", "skin", "other")


def as_image(arr) -> np.ndarray:
    """Validate and coerce an array to the (H, W, 3) float32 image convention."""
    img = np.asarray(arr, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return img


def as_mask(arr) -> np.ndarray:
    """Validate and coerce an array to the (H, W) float32 alpha-mask convention."""
    m = np.asarray(arr, dtype=np.float32)
    if m.ndim != 2:
        raise ValueError(f"expected (H, W) mask, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("mask contains non-finite values")
    if m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("mask values must lie in [0, 1]")
    return m


def _check_same_hw(*arrays):
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def load_image(path) -> np.ndarray:
    """Load an 8-bit raster as a float32 RGB image in [0, 1]."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image file: {path}")
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=np.float32) / 255.0


def save_image(img, path) -> None:
    """Save an image as an 8-bit RGB raster (rounded quantization)."""
    img = as_image(img)
    data = np.round(img * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def load_mask(path) -> np.ndarray:
    """Load an 8-bit grayscale raster as a float32 alpha mask in [0, 1]."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such mask file: {path}")
    with Image.open(path) as im:
        gray = im.convert("L")
        return np.asarray(gray, dtype=np.float32) / 255.0


def save_mask(mask, path) -> None:
    """Save an alpha mask as 8-bit grayscale (value/255 is the alpha)."""
    mask = as_mask(mask)
    data = np.round(mask * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def quantize_mask(mask) -> np.ndarray:
    """Round-trip a mask through its 8-bit file representation, in memory."""
    mask = as_mask(mask)
    return np.round(mask * 255.0).astype(np.uint8).astype(np.float32) / 255.0


def alpha_composite(target, warped_ref, mask) -> np.ndarray:
    """Per-pixel convex combination M*ref + (1-M)*target.

    This is the first-stage transfer estimate: the reference (already warped
    onto the target geometry) replaces the target wherever the mask says so.
    """
    target = as_image(target)
    warped_ref = as_image(warped_ref)
    mask = as_mask(mask)
    _check_same_hw(target, warped_ref, mask)
    m = mask[..., None]
    out = m * warped_ref + (1.0 - m) * target
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def color_offset(img, mask, offset) -> np.ndarray:
    """Shift colors by a constant offset, weighted by the mask, then clamp.

    Mitigates skin-like makeup that the extractor cannot see: the user nudges
    the masked color before application.
    """
    img = as_image(img)
    mask = as_mask(mask)
    _check_same_hw(img, mask)
    off = np.asarray(offset, dtype=np.float32).reshape(3)
    if np.abs(off).max() > 1.0:
        raise ValueError("offset components must lie in [-1, 1]")
    out = img + mask[..., None] * off
    return np.clip(out, 0.0, 1.0).astype(np.float32)


@dataclass(frozen=True)
class RegionSelection:
    """A set of facial regions, optionally extended by a freehand pixel set."""

    regions: frozenset = field(default_factory=frozenset)
    freehand: np.ndarray | None = None  # boolean (H, W), optional

    def __post_init__(self):
        bad = set(self.regions) - set(REGION_NAMES)
        if bad:
            raise ValueError(f"unknown region ids: {sorted(bad)}")

    @classmethod
    def of(cls, *regions, freehand=None):
        return cls(regions=frozenset(regions), freehand=freehand)

    def pixel_mask(self, region_map) -> np.ndarray:
        """Resolve the selection to a boolean (H, W) mask.

        region_map maps region name -> binary (H, W) layer (a RegionEncoding
        from the geometry module, or a plain dict).
        """
        if hasattr(region_map, "as_dict"):
            region_map = region_map.as_dict()
        for name in self.regions:
            if name not in region_map:
                raise ValueError(f"region map lacks layer {name!r}")
        shapes = {np.asarray(v).shape for v in region_map.values()}
        if len(shapes) != 1:
            raise ValueError("region map layers disagree on shape")
        shape = shapes.pop()
        sel = np.zeros(shape, dtype=bool)
        for name in self.regions:
            sel |= np.asarray(region_map[name]) > 0.5
        if self.freehand is not None:
            fh = np.asarray(self.freehand, dtype=bool)
            if fh.shape != shape:
                raise ValueError("freehand selection shape mismatch")
            sel |= fh
        return sel


def mask_combine(entries) -> np.ndarray:
    """Combine masks from several references into one look.

    entries: iterable of (mask, RegionSelection, region_map). Each mask is
    restricted to its selection; the output is the per-pixel max over the
    restricted masks, so overlapping styles never overflow 1.
    """
    entries = list(entries)
    if not entries:
        raise ValueError("mask_combine needs at least one entry")
    masks = [as_mask(m) for m, _, _ in entries]
    _check_same_hw(*masks)
    out = np.zeros_like(masks[0])
    for mask, sel, region_map in entries:
        mask = as_mask(mask)
        sel_px = sel.pixel_mask(region_map)
        if sel_px.shape != mask.shape:
            raise ValueError("selection dimensions do not match mask")
        np.maximum(out, np.where(sel_px, mask, 0.0), out=out)
    return out.astype(np.float32)


def mask_erase(mask, sel: RegionSelection, region_map) -> np.ndarray:
    """Zero the mask over the selected pixels (remove part of a style)."""
    mask = as_mask(mask)
    sel_px = sel.pixel_mask(region_map)
    if sel_px.shape != mask.shape:
        raise ValueError("selection dimensions do not match mask")
    return np.where(sel_px, np.float32(0.0), mask)


def mask_scale(mask, factor) -> np.ndarray:
    """Scale mask intensity by a non-negative factor, clamped to [0, 1]."""
    mask = as_mask(mask)
    if factor < 0:
        raise ValueError("scale factor must be >= 0")
    return np.clip(mask * np.float32(factor), 0.0, 1.0).astype(np.float32)


def poisson_blend(src, dst, region, tol=1e-6, max_iter_factor=10) -> np.ndarray:
    """Gradient-domain blend of src into dst over a binary region.

    Inside the region the output satisfies the discrete Poisson equation with
    the Laplacian of src as guidance and dst as the Dirichlet boundary;
    outside the region the output is dst, untouched. Solved per channel with
    conjugate gradients (the system is symmetric positive definite).
    """
    src = np.asarray(src, dtype=np.float64)
    dst_in = np.asarray(dst, dtype=np.float64)
    region = as_mask(region)
    if not np.all((region == 0.0) | (region == 1.0)):
        raise ValueError("poisson_blend region must be binary")
    if src.shape != dst_in.shape:
        raise ValueError("src/dst dimension mismatch")
    _check_same_hw(src, region)

    squeeze = False
    if src.ndim == 2:
        src = src[..., None]
        dst_in = dst_in[..., None]
        squeeze = True
    elif src.ndim != 3:
        raise ValueError("poisson_blend expects (H, W) or (H, W, C) arrays")

    h, w = region.shape
    inside = region > 0.5
    if inside[0, :].any() or inside[-1, :].any() or inside[:, 0].any() or inside[:, -1].any():
        raise ValueError("blend region must not touch the image border")

    out = dst_in.copy()
    n = int(inside.sum())
    if n == 0:
        return out[..., 0].astype(np.float32) if squeeze else out.astype(np.float32)

    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(inside)
    idx[ys, xs] = np.arange(n)

    # 5-point Laplacian restricted to the region; boundary neighbours go to b.
    rows, cols, vals = [], [], []
    neighbor_terms = []  # (eq_row, ny, nx) pairs that pull dst boundary values
    for k in range(n):
        y, x = ys[k], xs[k]
        rows.append(k)
        cols.append(k)
        vals.append(4.0)
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if inside[ny, nx]:
                rows.append(k)
                cols.append(idx[ny, nx])
                vals.append(-1.0)
            else:
                neighbor_terms.append((k, ny, nx))
    a_mat = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    lap_src = np.zeros((n, src.shape[2]))
    for c in range(src.shape[2]):
        ch = src[..., c]
        lap_src[:, c] = (
            4.0 * ch[ys, xs]
            - ch[ys - 1, xs]
            - ch[ys + 1, xs]
            - ch[ys, xs - 1]
            - ch[ys, xs + 1]
        )

    max_iter = max(max_iter_factor * n, 50)
    for c in range(src.shape[2]):
        b = lap_src[:, c].copy()
        for k, ny, nx in neighbor_terms:
            b[k] += dst_in[ny, nx, c]
        x0 = dst_in[ys, xs, c]
        sol, info = cg(a_mat, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter)
        if info != 0:
            raise RuntimeError(f"poisson solver did not converge (info={info})")
        out[ys, xs, c] = sol

    out = np.clip(out, 0.0, 1.0)
    return (out[..., 0] if squeeze else out).astype(np.float32)
