"""Pure-numpy implementations of the hot warp kernels.

These mirror makeuplab._native exactly (same triangle-order tie-breaking,
same epsilon) so the two backends are interchangeable. The native module is
preferred at import time when it built; see makeuplab.kernels.
"""
from __future__ import annotations

import numpy as np

_EPS = 1e-9


def warp_coords(src_pts, dst_pts, simplices, h, w):
    """Backward-warp sampling coordinates for a piecewise-affine warp.

    For every output pixel (in dst geometry) find the covering dst triangle
    (first triangle in simplex order wins on ties) and map the pixel through
    that triangle's affine into src coordinates. Pixels covered by no
    triangle sample themselves (identity), clamped to the image.

    Returns (sy, sx) float64 arrays of shape (h, w).
    """
    src_pts = np.asarray(src_pts, dtype=np.float64)
    dst_pts = np.asarray(dst_pts, dtype=np.float64)
    simplices = np.asarray(simplices, dtype=np.int64)

    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    sy = yy.copy()
    sx = xx.copy()
    assigned = np.zeros((h, w), dtype=bool)

    for tri in simplices:
        d0, d1, d2 = dst_pts[tri]
        s0, s1, s2 = src_pts[tri]
        det = (d1[0] - d0[0]) * (d2[1] - d0[1]) - (d2[0] - d0[0]) * (d1[1] - d0[1])
        if abs(det) < _EPS:
            continue
        x_lo = max(int(np.floor(min(d0[0], d1[0], d2[0]))), 0)
        x_hi = min(int(np.ceil(max(d0[0], d1[0], d2[0]))), w - 1)
        y_lo = max(int(np.floor(min(d0[1], d1[1], d2[1]))), 0)
        y_hi = min(int(np.ceil(max(d0[1], d1[1], d2[1]))), h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        px = xx[y_lo : y_hi + 1, x_lo : x_hi + 1]
        py = yy[y_lo : y_hi + 1, x_lo : x_hi + 1]
        l1 = ((px - d0[0]) * (d2[1] - d0[1]) - (d2[0] - d0[0]) * (py - d0[1])) / det
        l2 = ((d1[0] - d0[0]) * (py - d0[1]) - (px - d0[0]) * (d1[1] - d0[1])) / det
        l0 = 1.0 - l1 - l2
        inside = (l0 >= -_EPS) & (l1 >= -_EPS) & (l2 >= -_EPS)
        take = inside & ~assigned[y_lo : y_hi + 1, x_lo : x_hi + 1]
        if not take.any():
            continue
        tsx = l0 * s0[0] + l1 * s1[0] + l2 * s2[0]
        tsy = l0 * s0[1] + l1 * s1[1] + l2 * s2[1]
        view_sy = sy[y_lo : y_hi + 1, x_lo : x_hi + 1]
        view_sx = sx[y_lo : y_hi + 1, x_lo : x_hi + 1]
        view_sy[take] = tsy[take]
        view_sx[take] = tsx[take]
        assigned[y_lo : y_hi + 1, x_lo : x_hi + 1] |= take

    np.clip(sy, 0.0, h - 1.0, out=sy)
    np.clip(sx, 0.0, w - 1.0, out=sx)
    return sy, sx


def bilinear_sample(img, sy, sx):
    """Sample img (H, W, C) at subpixel coords with bilinear weights.

    Interpolation runs in float64 and casts once at the end, matching the
    native kernel bit for bit.
    """
    img = np.asarray(img, dtype=np.float32).astype(np.float64)
    h, w = img.shape[:2]
    sy = np.clip(np.asarray(sy, dtype=np.float64), 0.0, h - 1.0)
    sx = np.clip(np.asarray(sx, dtype=np.float64), 0.0, w - 1.0)

    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[..., None]
    fx = (sx - x0)[..., None]

    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return (top * (1.0 - fy) + bot * fy).astype(np.float32)
