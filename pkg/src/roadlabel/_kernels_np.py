"""Pure-numpy fallback for the resampling kernels.

Mirrors the arithmetic of the compiled extension (``_kernels_cy``) operation
by operation so both backends produce the same images; keep the two in sync
when touching interpolation details.
"""

import numpy as np


def _inverse_grid(m00, m01, m02, m10, m11, m12, out_h, out_w):
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    gx = m00 * xs[None, :] + m01 * ys[:, None] + m02
    gy = m10 * xs[None, :] + m11 * ys[:, None] + m12
    return gx, gy


def bilinear_sample(src, xs, ys):
    """Sample ``src`` at float coordinates, 0.0 outside the source extent."""
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    valid = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    x0 = np.clip(np.floor(xs), 0, w - 2).astype(np.intp)
    y0 = np.clip(np.floor(ys), 0, h - 2).astype(np.intp)
    fx = xs - x0
    fy = ys - y0
    top = src[y0, x0] * (1.0 - fx) + src[y0, x0 + 1] * fx
    bot = src[y0 + 1, x0] * (1.0 - fx) + src[y0 + 1, x0 + 1] * fx
    return np.where(valid, top * (1.0 - fy) + bot * fy, 0.0)


def affine_warp_bilinear(src, m00, m01, m02, m10, m11, m12, out_h, out_w):
    """Inverse-mapped affine warp with bilinear sampling, zero fill."""
    gx, gy = _inverse_grid(m00, m01, m02, m10, m11, m12, out_h, out_w)
    return bilinear_sample(src, gx, gy)


def affine_warp_nearest(src, m00, m01, m02, m10, m11, m12, out_h, out_w):
    """Inverse-mapped affine warp with nearest sampling, zero fill (uint8)."""
    src = np.asarray(src, dtype=np.uint8)
    h, w = src.shape
    gx, gy = _inverse_grid(m00, m01, m02, m10, m11, m12, out_h, out_w)
    # floor(v + 0.5) keeps half-pixel rounding identical to the compiled path
    xi = np.floor(gx + 0.5)
    yi = np.floor(gy + 0.5)
    valid = (xi >= 0.0) & (xi <= w - 1.0) & (yi >= 0.0) & (yi <= h - 1.0)
    xc = np.clip(xi, 0, w - 1).astype(np.intp)
    yc = np.clip(yi, 0, h - 1).astype(np.intp)
    return np.where(valid, src[yc, xc], np.uint8(0))
