#!/usr/bin/env python3
"""Compare the compiled resampling kernels against the numpy fallback.

Runs each kernel on identical inputs, checks the outputs are bit-identical
(the two backends promise the same arithmetic), and reports timings.

    python3 benchmarks/bench_kernels.py [--size 512] [--reps 20]
"""

import argparse
import math
import time

import numpy as np

from roadlabel import _kernels_np

try:
    from roadlabel import _kernels_cy
except ImportError:
    _kernels_cy = None


def _timeit(fn, reps):
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    n = args.size
    rng = np.random.default_rng(0)
    img = rng.random((n, n))
    mask = (rng.random((n, n)) > 0.5).astype(np.uint8) * 255
    xs = rng.uniform(-2, n + 1, (n, n))
    ys = rng.uniform(-2, n + 1, (n, n))
    # mild rotation+scale, inverse-mapped about the center
    ang, scale = 0.07, 1.03
    a = math.cos(ang) / scale
    b = math.sin(ang) / scale
    c = (n - 1) / 2.0
    m02 = c - (a * c - b * c)
    m12 = c - (b * c + a * c)
    coeffs = (a, -b, m02, b, a, m12, n, n)

    cases = [
        ("bilinear_sample", lambda k: k.bilinear_sample(img, xs, ys)),
        ("affine_warp_bilinear", lambda k: k.affine_warp_bilinear(img, *coeffs)),
        ("affine_warp_nearest", lambda k: k.affine_warp_nearest(mask, *coeffs)),
    ]

    print(f"size={n}x{n} reps={args.reps} (best-of timings)")
    print(f"{'kernel':24} {'numpy':>10} {'compiled':>10} {'speedup':>8}  parity")
    for name, call in cases:
        ref = call(_kernels_np)
        t_np = _timeit(lambda: call(_kernels_np), args.reps)
        if _kernels_cy is None:
            print(f"{name:24} {t_np * 1e3:9.2f}ms {'n/a':>10} {'n/a':>8}  n/a")
            continue
        out = call(_kernels_cy)
        identical = np.array_equal(ref, out)
        t_cy = _timeit(lambda: call(_kernels_cy), args.reps)
        print(f"{name:24} {t_np * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms "
              f"{t_np / t_cy:7.1f}x  {'bit-identical' if identical else 'MISMATCH'}")
        if not identical:
            raise SystemExit(f"{name}: backends disagree")


if __name__ == "__main__":
    main()
