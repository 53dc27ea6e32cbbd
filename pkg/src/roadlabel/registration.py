"""Frequency-domain registration of two frames.

The method recovers a similarity transform in two stages:

1. Rotation and scale appear as translations in the log-polar resampling of
   the high-pass-filtered magnitude spectrum, so a phase correlation between
   the two log-polar spectra yields (rotation, scale).
2. The source is warped by the recovered rotation/scale and a second phase
   correlation, in the pixel domain, yields the translation.

Because the magnitude spectrum of a real image is point-symmetric, stage 1
only determines the rotation up to 180 degrees; both candidates are scored
at stage 2 and the one with the stronger correlation response wins.

The response reported for a registration is the stage-2 response: the
normalized signal power in a 5x5 window around the correlation peak,
a value in [0, 1] that discriminates good alignments from failures.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from roadlabel import kernels
from roadlabel.errors import (
    ConfigError,
    DimensionMismatchError,
    ZeroEnergyError,
)
from roadlabel.imgcore import Frame, SimilarityTransform, to_gray, warp_image, wrap_angle


@dataclass(frozen=True)
class FMParams:
    """Tuning knobs for the registration pipeline.

    Bin counts of 0 mean "match the image dimension" (angular bins take the
    height, radial bins the width), which keeps the log-polar raster roughly
    the same size as the input.
    """

    highpass_enabled: bool = True
    logpolar_radial_bins: int = 0
    logpolar_angular_bins: int = 0
    window: str = "hanning"
    subpixel_window: int = 5

    def __post_init__(self):
        for n in (self.logpolar_radial_bins, self.logpolar_angular_bins):
            if n != 0 and n < 8:
                raise ConfigError(f"log-polar bin counts must be >= 8, got {n}")
        if self.window != "hanning":
            raise ConfigError(f"unsupported window {self.window!r}")
        if self.subpixel_window < 3 or self.subpixel_window % 2 == 0:
            raise ConfigError("subpixel_window must be odd and >= 3")


@dataclass(frozen=True)
class RegistrationResult:
    transform: SimilarityTransform
    response: float
    rotation_alternate_tested: bool


def _hann2d(h: int, w: int) -> np.ndarray:
    return np.outer(np.hanning(h), np.hanning(w))


def _highpass(h: int, w: int) -> np.ndarray:
    """Low-frequency attenuation filter on the fftshifted spectrum.

    H(x, y) = (1 - cos(pi x) cos(pi y)) (2 - cos(pi x) cos(pi y)) with
    x, y the normalized frequencies in [-0.5, 0.5); zero at DC, maximal at
    the corners.
    """
    fy = (np.arange(h) - h // 2) / h
    fx = (np.arange(w) - w // 2) / w
    x = np.outer(np.cos(np.pi * fy), np.cos(np.pi * fx))
    return (1.0 - x) * (2.0 - x)


def _logpolar_grids(h: int, w: int, radial_bins: int, angular_bins: int):
    """Sampling coordinates mapping (angle row, log-radius col) to (x, y)."""
    cx, cy = w // 2, h // 2
    r_max = min(h, w) / 2.0
    log_base = math.exp(math.log(r_max) / radial_bins)
    radii = log_base ** np.arange(radial_bins, dtype=np.float64)
    angles = np.arange(angular_bins, dtype=np.float64) * (math.pi / angular_bins)
    xs = cx + np.outer(np.cos(angles), radii)
    ys = cy + np.outer(np.sin(angles), radii)
    return xs, ys, log_base


def fm_spectrum(img: np.ndarray, p: FMParams = FMParams()) -> np.ndarray:
    """Log-polar view of the high-pass-filtered magnitude spectrum.

    Pipeline: Hanning window, FFT, magnitude, fftshift, high-pass emphasis,
    log-polar resampling (angles [0, pi), radii [1, min(w,h)/2] on a log
    scale). Output values are normalized into [0, 1].
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    windowed = img * _hann2d(h, w)
    mag = np.abs(scipy.fft.fftshift(scipy.fft.fft2(windowed)))
    peak = mag.max()
    if peak > 0.0:
        mag /= peak
    if p.highpass_enabled:
        # The filter's maximum gain is 2 (at the corners); halving keeps the
        # output within [0, 1].
        mag *= _highpass(h, w) * 0.5
    radial = p.logpolar_radial_bins or w
    angular = p.logpolar_angular_bins or h
    xs, ys, _ = _logpolar_grids(h, w, radial, angular)
    return kernels.bilinear_sample(mag, xs, ys)


def phase_correlate(a: np.ndarray, b: np.ndarray, *, window: bool = True,
                    subpixel_window: int = 5):
    """Translation from ``a`` to ``b`` by normalized cross-power spectrum.

    Returns ``((dx, dy), response)`` where ``b`` matches ``a`` shifted by
    ``(dx, dy)`` pixels (wrap-around semantics). The peak is refined to
    subpixel precision with an intensity-weighted centroid over a small
    window, and the response is the normalized amplitude of that window:
    the square root of its share of total correlation-surface energy,
    clamped to [0, 1].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"phase_correlate: {a.shape} vs {b.shape}")
    if not np.any(a) or not np.any(b):
        raise ZeroEnergyError("phase_correlate: all-zero input")
    if window:
        h, w = a.shape
        win = _hann2d(h, w)
        a = (a - a.mean()) * win
        b = (b - b.mean()) * win
        if not np.any(a) or not np.any(b):
            raise ZeroEnergyError("phase_correlate: input has no variation")
    fa = scipy.fft.fft2(a)
    fb = scipy.fft.fft2(b)
    cross = np.conj(fa) * fb
    denom = np.abs(cross)
    # Bins where both spectra vanish carry no phase information; leave them 0.
    np.divide(cross, denom, out=cross, where=denom > 1e-15)
    surface = scipy.fft.ifft2(cross).real
    h, w = surface.shape
    py, px = np.unravel_index(np.argmax(surface), surface.shape)

    half = subpixel_window // 2
    rows = (py + np.arange(-half, half + 1)) % h
    cols = (px + np.arange(-half, half + 1)) % w
    patch = surface[np.ix_(rows, cols)]
    weights = np.clip(patch, 0.0, None)
    total_w = weights.sum()
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    if total_w > 0.0:
        oy = float((weights.sum(axis=1) * offsets).sum() / total_w)
        ox = float((weights.sum(axis=0) * offsets).sum() / total_w)
    else:
        oy = ox = 0.0

    dx = px + ox
    dy = py + oy
    if dx > w / 2.0:
        dx -= w
    if dy > h / 2.0:
        dy -= h

    # Response: normalized signal power of the peak window — the L2 amplitude
    # of the window relative to the whole surface (the square root keeps the
    # score on the same scale as the correlation peak itself, so a 0.45
    # chain-filter threshold separates good registrations from failures).
    energy = np.square(surface, out=surface)
    total = energy.sum()
    window_energy = energy[np.ix_(rows, cols)].sum()
    response = math.sqrt(window_energy / total) if total > 0.0 else 0.0
    return (dx, dy), min(max(response, 0.0), 1.0)


@dataclass(frozen=True)
class FrameSignature:
    """Grayscale image together with its cached log-polar spectrum.

    Graph building registers each frame against dozens of partners; caching
    the spectrum avoids recomputing the FFT/log-polar stage per pair.
    """

    gray: np.ndarray
    spectrum: np.ndarray


def precompute(gray: np.ndarray, p: FMParams = FMParams()) -> FrameSignature:
    return FrameSignature(gray=np.asarray(gray, dtype=np.float64),
                          spectrum=fm_spectrum(gray, p))


def register_gray(src: np.ndarray, dst: np.ndarray, p: FMParams = FMParams(),
                  *, src_sig: FrameSignature | None = None,
                  dst_sig: FrameSignature | None = None) -> RegistrationResult:
    """Register two gray images; see module docstring for the algorithm."""
    src = src_sig.gray if src_sig is not None else np.asarray(src, dtype=np.float64)
    dst = dst_sig.gray if dst_sig is not None else np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape:
        raise DimensionMismatchError(f"register: {src.shape} vs {dst.shape}")
    h, w = src.shape

    spec_a = src_sig.spectrum if src_sig is not None else fm_spectrum(src, p)
    spec_b = dst_sig.spectrum if dst_sig is not None else fm_spectrum(dst, p)
    (d_rad, d_ang), _ = phase_correlate(spec_a, spec_b,
                                        subpixel_window=p.subpixel_window)

    radial = p.logpolar_radial_bins or w
    angular = p.logpolar_angular_bins or h
    _, _, log_base = _logpolar_grids(h, w, radial, angular)
    rotation = d_ang * math.pi / angular
    scale = log_base ** (-d_rad)

    best = None
    for candidate in (rotation, rotation + math.pi):
        candidate = wrap_angle(candidate)
        warped = warp_image(src, SimilarityTransform(scale=scale, rotation=candidate))
        (tx, ty), response = phase_correlate(warped, dst,
                                             subpixel_window=p.subpixel_window)
        result = RegistrationResult(
            transform=SimilarityTransform(scale=scale, rotation=candidate,
                                          tx=tx, ty=ty),
            response=response,
            rotation_alternate_tested=True,
        )
        if best is None or response > best.response:
            best = result
    return best


def register(src: Frame, dst: Frame, p: FMParams = FMParams()) -> RegistrationResult:
    """Register two frames, returning the transform mapping src onto dst."""
    if (src.width, src.height) != (dst.width, dst.height):
        raise DimensionMismatchError(
            f"register: {src.width}x{src.height} vs {dst.width}x{dst.height}"
        )
    return register_gray(to_gray(src), to_gray(dst), p)
