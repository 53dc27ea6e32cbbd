# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled resampling kernels.

The arithmetic here must stay operation-for-operation identical to
``_kernels_np`` so the two backends are interchangeable.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def bilinear_sample(src, xs, ys):
    """Sample ``src`` at float coordinates, 0.0 outside the source extent."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gx = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gy = np.ascontiguousarray(ys, dtype=np.float64)
    if gx.shape[0] != gy.shape[0] or gx.shape[1] != gy.shape[1]:
        raise ValueError("coordinate grids must share a shape")
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    cdef Py_ssize_t oh = gx.shape[0], ow = gx.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((oh, ow), dtype=np.float64)
    _sample_into(s, gx, gy, out, h, w, oh, ow)
    return out


cdef void _sample_into(cnp.float64_t[:, ::1] s,
                       cnp.float64_t[:, ::1] gx,
                       cnp.float64_t[:, ::1] gy,
                       cnp.float64_t[:, ::1] out,
                       Py_ssize_t h, Py_ssize_t w,
                       Py_ssize_t oh, Py_ssize_t ow) noexcept nogil:
    cdef Py_ssize_t i, j, x0, y0
    cdef double sx, sy, fx, fy, top, bot
    for i in range(oh):
        for j in range(ow):
            sx = gx[i, j]
            sy = gy[i, j]
            if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                continue
            x0 = <Py_ssize_t>floor(sx)
            y0 = <Py_ssize_t>floor(sy)
            if x0 > w - 2:
                x0 = w - 2
            if x0 < 0:
                x0 = 0
            if y0 > h - 2:
                y0 = h - 2
            if y0 < 0:
                y0 = 0
            fx = sx - x0
            fy = sy - y0
            top = s[y0, x0] * (1.0 - fx) + s[y0, x0 + 1] * fx
            bot = s[y0 + 1, x0] * (1.0 - fx) + s[y0 + 1, x0 + 1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy


def affine_warp_bilinear(src, double m00, double m01, double m02,
                         double m10, double m11, double m12,
                         Py_ssize_t out_h, Py_ssize_t out_w):
    """Inverse-mapped affine warp with bilinear sampling, zero fill."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((out_h, out_w), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] sv = s
    cdef cnp.float64_t[:, ::1] ov = out
    cdef Py_ssize_t i, j, x0, y0
    cdef double sx, sy, fx, fy, top, bot
    with nogil:
        for i in range(out_h):
            for j in range(out_w):
                sx = m00 * j + m01 * i + m02
                sy = m10 * j + m11 * i + m12
                if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                    continue
                x0 = <Py_ssize_t>floor(sx)
                y0 = <Py_ssize_t>floor(sy)
                if x0 > w - 2:
                    x0 = w - 2
                if x0 < 0:
                    x0 = 0
                if y0 > h - 2:
                    y0 = h - 2
                if y0 < 0:
                    y0 = 0
                fx = sx - x0
                fy = sy - y0
                top = sv[y0, x0] * (1.0 - fx) + sv[y0, x0 + 1] * fx
                bot = sv[y0 + 1, x0] * (1.0 - fx) + sv[y0 + 1, x0 + 1] * fx
                ov[i, j] = top * (1.0 - fy) + bot * fy
    return out


def affine_warp_nearest(src, double m00, double m01, double m02,
                        double m10, double m11, double m12,
                        Py_ssize_t out_h, Py_ssize_t out_w):
    """Inverse-mapped affine warp with nearest sampling, zero fill (uint8)."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] s = np.ascontiguousarray(src, dtype=np.uint8)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.zeros((out_h, out_w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] sv = s
    cdef cnp.uint8_t[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double sx, sy, xi, yi
    with nogil:
        for i in range(out_h):
            for j in range(out_w):
                sx = m00 * j + m01 * i + m02
                sy = m10 * j + m11 * i + m12
                xi = floor(sx + 0.5)
                yi = floor(sy + 0.5)
                if xi < 0.0 or xi > w - 1.0 or yi < 0.0 or yi > h - 1.0:
                    continue
                ov[i, j] = sv[<Py_ssize_t>yi, <Py_ssize_t>xi]
    return out
