"""Raster data model and geometric/photometric primitives.

Conventions used throughout the package:

* Gray images are 2-D float64 arrays with values in [0, 1].
* A ``SimilarityTransform`` maps a point ``p`` in the source frame to
  ``q = scale * R(rotation) @ p + (tx, ty)`` in the target frame, with
  coordinates measured from the image center ``((w-1)/2, (h-1)/2)``.
* Masks are binary; road pixels are True (255 in PNG form).

All value types are frozen dataclasses and their arrays are marked
read-only after construction, so instances can be shared freely between
worker threads.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from roadlabel import kernels
from roadlabel.errors import (
    DataIOError,
    DimensionMismatchError,
    InvalidTransformError,
    ValidationError,
)

# Mask provenance tags.
PROVENANCE_MANUAL = "manual"
PROVENANCE_REUSE = "reuse"
PROVENANCE_CORRECTED = "corrected"
_PROVENANCES = (PROVENANCE_MANUAL, PROVENANCE_REUSE, PROVENANCE_CORRECTED)

# ITU-R BT.601 luma weights.
_LUMA = (0.299, 0.587, 0.114)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Frame:
    """One camera frame: 8-bit gray ``(h, w)`` or color ``(h, w, 3)`` pixels."""

    camera_id: str
    frame_id: str
    timestamp: float
    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.dtype != np.uint8:
            raise ValidationError("frame pixels must be a uint8 array")
        if px.ndim == 3 and px.shape[2] != 3:
            raise ValidationError(f"color frames need 3 channels, got {px.shape[2]}")
        if px.ndim not in (2, 3):
            raise ValidationError(f"frame pixels must be 2-D or 3-D, got {px.ndim}-D")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError("frame dimensions must be positive")
        object.__setattr__(self, "pixels", _freeze(np.ascontiguousarray(px)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class LabelMask:
    """Binary road mask; ``bits`` is a bool array, True on road pixels."""

    bits: np.ndarray
    provenance: str
    source_frame_id: str

    def __post_init__(self):
        bits = self.bits
        if not isinstance(bits, np.ndarray) or bits.dtype != np.bool_ or bits.ndim != 2:
            raise ValidationError("mask bits must be a 2-D bool array")
        if self.provenance not in _PROVENANCES:
            raise ValidationError(f"unknown mask provenance {self.provenance!r}")
        object.__setattr__(self, "bits", _freeze(np.ascontiguousarray(bits)))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class SimilarityTransform:
    """Uniform scale + rotation + translation, applied about the image center."""

    scale: float = 1.0
    rotation: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        # plain Python floats keep repr/json serialization clean even when
        # parameters arrive as numpy scalars
        for name in ("scale", "rotation", "tx", "ty"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = (self.scale, self.rotation, self.tx, self.ty)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidTransformError(f"non-finite transform parameters: {vals}")
        if self.scale <= 0.0:
            raise InvalidTransformError(f"scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls()

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map ``(n, 2)`` center-origin points from source to target coords."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        x, y = pts[:, 0], pts[:, 1]
        qx = self.scale * (c * x - s * y) + self.tx
        qy = self.scale * (s * x + c * y) + self.ty
        return np.stack([qx, qy], axis=1)


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


def compose(a: SimilarityTransform, b: SimilarityTransform) -> SimilarityTransform:
    """Transform equivalent to applying ``a`` first, then ``b``."""
    c, s = math.cos(b.rotation), math.sin(b.rotation)
    return SimilarityTransform(
        scale=a.scale * b.scale,
        rotation=wrap_angle(a.rotation + b.rotation),
        tx=b.scale * (c * a.tx - s * a.ty) + b.tx,
        ty=b.scale * (s * a.tx + c * a.ty) + b.ty,
    )


def invert(t: SimilarityTransform) -> SimilarityTransform:
    inv_scale = 1.0 / t.scale
    c, s = math.cos(-t.rotation), math.sin(-t.rotation)
    return SimilarityTransform(
        scale=inv_scale,
        rotation=wrap_angle(-t.rotation),
        tx=-inv_scale * (c * t.tx - s * t.ty),
        ty=-inv_scale * (s * t.tx + c * t.ty),
    )


def to_gray(frame: Frame) -> np.ndarray:
    """Luma conversion (0.299/0.587/0.114) rescaled to [0, 1]."""
    px = frame.pixels
    if px.ndim == 2:
        return px.astype(np.float64) / 255.0
    flat = px.astype(np.float64) / 255.0
    gray = _LUMA[0] * flat[..., 0] + _LUMA[1] * flat[..., 1] + _LUMA[2] * flat[..., 2]
    return np.clip(gray, 0.0, 1.0)


def _inverse_affine(t: SimilarityTransform, width: int, height: int):
    """Output-to-source affine coefficients for center-origin warping."""
    inv = invert(t)
    a = inv.scale * math.cos(inv.rotation)
    b = inv.scale * math.sin(inv.rotation)
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    m02 = inv.tx + cx - (a * cx - b * cy)
    m12 = inv.ty + cy - (b * cx + a * cy)
    return a, -b, m02, b, a, m12


def warp_image(img: np.ndarray, t: SimilarityTransform) -> np.ndarray:
    """Warp a gray image by ``t`` (bilinear, zero fill, same dimensions)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValidationError("warp_image expects a 2-D gray image")
    h, w = img.shape
    m00, m01, m02, m10, m11, m12 = _inverse_affine(t, w, h)
    return kernels.affine_warp_bilinear(img, m00, m01, m02, m10, m11, m12, h, w)


def warp_mask(mask: LabelMask, t: SimilarityTransform) -> LabelMask:
    """Warp a mask by ``t`` (nearest neighbor so labels stay binary)."""
    h, w = mask.bits.shape
    m00, m01, m02, m10, m11, m12 = _inverse_affine(t, w, h)
    src = np.where(mask.bits, np.uint8(255), np.uint8(0))
    warped = kernels.affine_warp_nearest(src, m00, m01, m02, m10, m11, m12, h, w)
    return LabelMask(
        bits=warped > 0,
        provenance=PROVENANCE_CORRECTED,
        source_frame_id=mask.source_frame_id,
    )


def overlay_mask(frame: Frame, mask: LabelMask, alpha: float = 0.45,
                 color=(255, 64, 64)) -> np.ndarray:
    """Blend the mask over the frame for visual inspection (RGB uint8)."""
    if (frame.height, frame.width) != (mask.height, mask.width):
        raise DimensionMismatchError(
            f"frame {frame.width}x{frame.height} vs mask {mask.width}x{mask.height}"
        )
    px = frame.pixels
    rgb = np.stack([px] * 3, axis=-1) if px.ndim == 2 else px.copy()
    rgb = rgb.astype(np.float64)
    tint = np.asarray(color, dtype=np.float64)
    rgb[mask.bits] = (1.0 - alpha) * rgb[mask.bits] + alpha * tint
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# File I/O. Frames are PNG/JPEG; masks are single-channel PNG, 0 = non-road,
# 255 = road.
# ---------------------------------------------------------------------------


def load_frame(path, camera_id: str = "", frame_id: str = "",
               timestamp: float | None = None) -> Frame:
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            px = np.asarray(im, dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataIOError(f"cannot read image {path}: {exc}") from exc
    if timestamp is None:
        try:
            timestamp = float(path.stem)
        except ValueError:
            raise ValidationError(
                f"frame file name {path.name!r} is not a numeric timestamp; "
                "pass timestamp= explicitly"
            ) from None
    return Frame(
        camera_id=camera_id or path.parent.name,
        frame_id=frame_id or path.stem,
        timestamp=timestamp,
        pixels=px,
    )


def save_frame(frame: Frame, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "L" if frame.pixels.ndim == 2 else "RGB"
    try:
        Image.fromarray(frame.pixels, mode=mode).save(path)
    except OSError as exc:
        raise DataIOError(f"cannot write image {path}: {exc}") from exc


def load_mask(path, provenance: str = PROVENANCE_MANUAL,
              source_frame_id: str = "") -> LabelMask:
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataIOError(f"cannot read mask {path}: {exc}") from exc
    return LabelMask(bits=arr > 127, provenance=provenance,
                     source_frame_id=source_frame_id or path.stem)


def save_mask(mask: LabelMask, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.where(mask.bits, np.uint8(255), np.uint8(0))
    try:
        Image.fromarray(arr, mode="L").save(path)
    except OSError as exc:
        raise DataIOError(f"cannot write mask {path}: {exc}") from exc


_FRAME_SUFFIXES = (".png", ".jpg", ".jpeg")


def load_feed(feed_dir, camera_id: str = "") -> list[Frame]:
    """Load all frames of one camera directory, sorted by timestamp.

    File stems must be numeric timestamps (the layout the ingest module
    writes). All frames must share one geometry.
    """
    feed_dir = Path(feed_dir)
    if not feed_dir.is_dir():
        raise DataIOError(f"feed directory {feed_dir} does not exist")
    cam = camera_id or feed_dir.name
    frames = []
    for p in sorted(feed_dir.iterdir()):
        if p.suffix.lower() not in _FRAME_SUFFIXES:
            continue
        frames.append(load_frame(p, camera_id=cam))
    frames.sort(key=lambda f: (f.timestamp, f.frame_id))
    for f in frames[1:]:
        if (f.width, f.height) != (frames[0].width, frames[0].height):
            raise DimensionMismatchError(
                f"frame {f.frame_id} is {f.width}x{f.height}, feed {cam} "
                f"started at {frames[0].width}x{frames[0].height}"
            )
    return frames
