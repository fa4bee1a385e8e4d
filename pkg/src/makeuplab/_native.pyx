# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython warp kernels: per-pixel triangle rasterization and bilinear sampling.

Semantics match makeuplab._kernels_py (first triangle in simplex order wins,
identity fill for uncovered pixels, float64 interpolation arithmetic).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()

DEF EPS = 1e-9


def warp_coords(src_pts, dst_pts, simplices, Py_ssize_t h, Py_ssize_t w):
    cdef cnp.float64_t[:, ::1] sp = np.ascontiguousarray(src_pts, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] dp = np.ascontiguousarray(dst_pts, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] tris = np.ascontiguousarray(simplices, dtype=np.int64)

    sy_arr = np.empty((h, w), dtype=np.float64)
    sx_arr = np.empty((h, w), dtype=np.float64)
    assigned_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.float64_t[:, ::1] sy = sy_arr
    cdef cnp.float64_t[:, ::1] sx = sx_arr
    cdef cnp.uint8_t[:, ::1] assigned = assigned_arr

    cdef Py_ssize_t y, x, t, n_tri = tris.shape[0]
    cdef Py_ssize_t x_lo, x_hi, y_lo, y_hi
    cdef cnp.int64_t i0, i1, i2
    cdef double d0x, d0y, d1x, d1y, d2x, d2y
    cdef double s0x, s0y, s1x, s1y, s2x, s2y
    cdef double det, l0, l1, l2, px, py, lo, hi

    for y in range(h):
        for x in range(w):
            sy[y, x] = <double> y
            sx[y, x] = <double> x

    for t in range(n_tri):
        i0 = tris[t, 0]; i1 = tris[t, 1]; i2 = tris[t, 2]
        d0x = dp[i0, 0]; d0y = dp[i0, 1]
        d1x = dp[i1, 0]; d1y = dp[i1, 1]
        d2x = dp[i2, 0]; d2y = dp[i2, 1]
        s0x = sp[i0, 0]; s0y = sp[i0, 1]
        s1x = sp[i1, 0]; s1y = sp[i1, 1]
        s2x = sp[i2, 0]; s2y = sp[i2, 1]
        det = (d1x - d0x) * (d2y - d0y) - (d2x - d0x) * (d1y - d0y)
        if det < EPS and det > -EPS:
            continue
        lo = d0x
        if d1x < lo: lo = d1x
        if d2x < lo: lo = d2x
        hi = d0x
        if d1x > hi: hi = d1x
        if d2x > hi: hi = d2x
        x_lo = <Py_ssize_t> floor(lo)
        x_hi = <Py_ssize_t> ceil(hi)
        if x_lo < 0: x_lo = 0
        if x_hi > w - 1: x_hi = w - 1
        lo = d0y
        if d1y < lo: lo = d1y
        if d2y < lo: lo = d2y
        hi = d0y
        if d1y > hi: hi = d1y
        if d2y > hi: hi = d2y
        y_lo = <Py_ssize_t> floor(lo)
        y_hi = <Py_ssize_t> ceil(hi)
        if y_lo < 0: y_lo = 0
        if y_hi > h - 1: y_hi = h - 1
        for y in range(y_lo, y_hi + 1):
            py = <double> y
            for x in range(x_lo, x_hi + 1):
                if assigned[y, x]:
                    continue
                px = <double> x
                l1 = ((px - d0x) * (d2y - d0y) - (d2x - d0x) * (py - d0y)) / det
                l2 = ((d1x - d0x) * (py - d0y) - (px - d0x) * (d1y - d0y)) / det
                l0 = 1.0 - l1 - l2
                if l0 >= -EPS and l1 >= -EPS and l2 >= -EPS:
                    sx[y, x] = l0 * s0x + l1 * s1x + l2 * s2x
                    sy[y, x] = l0 * s0y + l1 * s1y + l2 * s2y
                    assigned[y, x] = 1

    for y in range(h):
        for x in range(w):
            if sy[y, x] < 0.0: sy[y, x] = 0.0
            elif sy[y, x] > h - 1.0: sy[y, x] = h - 1.0
            if sx[y, x] < 0.0: sx[y, x] = 0.0
            elif sx[y, x] > w - 1.0: sx[y, x] = w - 1.0

    return sy_arr, sx_arr


def bilinear_sample(img, sy, sx):
    cdef cnp.float32_t[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.float32)
    cdef cnp.float64_t[:, ::1] cy = np.ascontiguousarray(sy, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] cx = np.ascontiguousarray(sx, dtype=np.float64)

    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], nc = im.shape[2]
    cdef Py_ssize_t oh = cy.shape[0], ow = cy.shape[1]
    out_arr = np.empty((oh, ow, nc), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] out = out_arr

    cdef Py_ssize_t y, x, c, y0, x0, y1, x1
    cdef double fy, fx, yy, xx, top, bot

    for y in range(oh):
        for x in range(ow):
            yy = cy[y, x]
            xx = cx[y, x]
            if yy < 0.0: yy = 0.0
            elif yy > h - 1.0: yy = h - 1.0
            if xx < 0.0: xx = 0.0
            elif xx > w - 1.0: xx = w - 1.0
            y0 = <Py_ssize_t> floor(yy)
            x0 = <Py_ssize_t> floor(xx)
            y1 = y0 + 1
            if y1 > h - 1: y1 = h - 1
            x1 = x0 + 1
            if x1 > w - 1: x1 = w - 1
            fy = yy - <double> y0
            fx = xx - <double> x0
            for c in range(nc):
                top = (<double> im[y0, x0, c]) * (1.0 - fx) + (<double> im[y0, x1, c]) * fx
                bot = (<double> im[y1, x0, c]) * (1.0 - fx) + (<double> im[y1, x1, c]) * fx
                out[y, x, c] = <cnp.float32_t> (top * (1.0 - fy) + bot * fy)

    return out_arr
