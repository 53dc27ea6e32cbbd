"""Emit the three training-set variants from feeds, labels, and chains.

* baseline  - only the manually labeled reference frame of each feed.
* reuse     - the reference mask copied verbatim onto every frame.
* corrected - the reference mask warped through the optimal transform chain;
              frames whose chain failed or fell below the response threshold
              are reported and left out.

Layout under the output directory: ``<camera_id>/<frame_id>.png`` plus
``<camera_id>/<frame_id>.mask.png``, a ``manifest.ndjson`` with one record
per emitted frame, and a ``report.txt`` listing every skip or filter with
its reason. Identical inputs produce byte-identical outputs.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from roadlabel.chaingraph import DEFAULT_RESPONSE_THRESHOLD, STATUS_OK
from roadlabel.errors import ConfigError, DataIOError
from roadlabel.imgcore import (
    Frame,
    LabelMask,
    PROVENANCE_MANUAL,
    PROVENANCE_REUSE,
    load_mask,
    save_frame,
    save_mask,
    warp_mask,
)

MODE_BASELINE = "baseline"
MODE_REUSE = "reuse"
MODE_CORRECTED = "corrected"


@dataclass(frozen=True)
class FeedAnnotation:
    """One feed's manual annotation plus optional per-frame exclusions.

    Exclusion masks (e.g. vehicle detections) are binary masks whose True
    pixels are removed from any label emitted for that frame.
    """

    camera_id: str
    reference_frame_id: str
    manual_mask: LabelMask
    exclusion_masks: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ManifestEntry:
    frame_path: str
    mask_path: str
    camera_id: str
    timestamp: float
    mode: str
    chain_length: int
    response_product: float
    filtered_reason: str | None = None

    def to_json(self) -> str:
        rec = {
            "frame_path": self.frame_path,
            "mask_path": self.mask_path,
            "camera_id": self.camera_id,
            "timestamp": self.timestamp,
            "mode": self.mode,
            "chain_length": self.chain_length,
            "response_product": self.response_product,
        }
        if self.filtered_reason is not None:
            rec["filtered_reason"] = self.filtered_reason
        return json.dumps(rec, separators=(",", ":"))


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(e.to_json() + "\n" for e in self.entries))

    @staticmethod
    def read(path) -> "DatasetManifest":
        path = Path(path)
        try:
            lines = path.read_text().splitlines()
        except OSError as exc:
            raise DataIOError(f"cannot read manifest {path}: {exc}") from exc
        entries = []
        for line in lines:
            if not line.strip():
                continue
            rec = json.loads(line)
            entries.append(ManifestEntry(
                frame_path=rec["frame_path"], mask_path=rec["mask_path"],
                camera_id=rec["camera_id"], timestamp=rec["timestamp"],
                mode=rec["mode"], chain_length=rec["chain_length"],
                response_product=rec["response_product"],
                filtered_reason=rec.get("filtered_reason")))
        return DatasetManifest(entries=tuple(entries))


@dataclass(frozen=True)
class TransferReport:
    lines: tuple

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(line + "\n" for line in self.lines))


def _apply_exclusion(mask: LabelMask, ann: FeedAnnotation, frame_id: str,
                     provenance: str) -> LabelMask:
    excl = ann.exclusion_masks.get(frame_id)
    bits = mask.bits
    if excl is not None and excl.bits.shape == bits.shape:
        bits = bits & ~excl.bits
    return LabelMask(bits=bits, provenance=provenance,
                     source_frame_id=mask.source_frame_id)


class _Emitter:
    """Shared bookkeeping for the three emit functions."""

    def __init__(self, feeds, annotations, out_dir):
        self.feeds = feeds
        self.by_camera = {}
        for ann in annotations:
            if ann.camera_id in self.by_camera:
                raise ConfigError(f"duplicate annotation for camera {ann.camera_id}")
            self.by_camera[ann.camera_id] = ann
        self.out_dir = Path(out_dir)
        self.entries = []
        self.reports = []

    def annotated_feeds(self):
        """Yield (camera_id, frames, annotation) for every usable feed."""
        for cam in sorted(self.feeds):
            frames = self.feeds[cam]
            ann = self.by_camera.get(cam)
            if ann is None:
                self.skip(cam, "-", "no annotation for feed")
                continue
            ref = next((f for f in frames
                        if f.frame_id == ann.reference_frame_id), None)
            if ref is None:
                self.skip(cam, ann.reference_frame_id,
                          "reference frame not in feed")
                continue
            if ann.manual_mask.bits.shape != ref.pixels.shape[:2]:
                self.skip(cam, ann.reference_frame_id,
                          "manual mask dimensions do not match feed")
                continue
            yield cam, frames, ann
        for cam in sorted(set(self.by_camera) - set(self.feeds)):
            self.skip(cam, "-", "annotation without feed")

    def skip(self, camera_id, frame_id, reason):
        self.reports.append(f"camera={camera_id}\tframe={frame_id}\t{reason}")

    def emit(self, frame: Frame, mask: LabelMask, mode: str,
             chain_length: int = 0, response_product: float = 1.0):
        rel_frame = f"{frame.camera_id}/{frame.frame_id}.png"
        rel_mask = f"{frame.camera_id}/{frame.frame_id}.mask.png"
        save_frame(frame, self.out_dir / rel_frame)
        save_mask(mask, self.out_dir / rel_mask)
        self.entries.append(ManifestEntry(
            frame_path=rel_frame, mask_path=rel_mask,
            camera_id=frame.camera_id, timestamp=frame.timestamp, mode=mode,
            chain_length=chain_length, response_product=response_product))

    def finish(self):
        manifest = DatasetManifest(entries=tuple(self.entries))
        report = TransferReport(lines=tuple(self.reports))
        manifest.write(self.out_dir / "manifest.ndjson")
        report.write(self.out_dir / "report.txt")
        return manifest, report


def emit_baseline(feeds, annotations, out_dir):
    """One entry per feed: the reference frame with its manual mask."""
    em = _Emitter(feeds, annotations, out_dir)
    for cam, frames, ann in em.annotated_feeds():
        ref = next(f for f in frames if f.frame_id == ann.reference_frame_id)
        mask = _apply_exclusion(ann.manual_mask, ann, ref.frame_id,
                                PROVENANCE_MANUAL)
        em.emit(ref, mask, MODE_BASELINE)
    return em.finish()


def emit_reuse(feeds, annotations, out_dir):
    """Reference mask copied verbatim onto every frame of each feed."""
    em = _Emitter(feeds, annotations, out_dir)
    for cam, frames, ann in em.annotated_feeds():
        for frame in frames:
            if ann.manual_mask.bits.shape != frame.pixels.shape[:2]:
                em.skip(cam, frame.frame_id, "frame dimensions do not match mask")
                continue
            mask = _apply_exclusion(ann.manual_mask, ann, frame.frame_id,
                                    PROVENANCE_REUSE)
            em.emit(frame, mask, MODE_REUSE)
    return em.finish()


def emit_corrected(feeds, annotations, chains, out_dir,
                   threshold: float = DEFAULT_RESPONSE_THRESHOLD):
    """Reference mask warped through each frame's optimal chain.

    ``chains`` maps camera_id to that feed's ChainResult list (as returned
    by chain_all from the feed's reference frame). Frames with a failed,
    filtered, or missing chain appear only in the report.
    """
    em = _Emitter(feeds, annotations, out_dir)
    for cam, frames, ann in em.annotated_feeds():
        results = {c.target_frame_id: c for c in chains.get(cam, ())}
        for frame in frames:
            if frame.frame_id == ann.reference_frame_id:
                mask = _apply_exclusion(ann.manual_mask, ann, frame.frame_id,
                                        PROVENANCE_MANUAL)
                em.emit(frame, mask, MODE_CORRECTED)
                continue
            chain = results.get(frame.frame_id)
            if chain is None:
                em.skip(cam, frame.frame_id, "no chain result")
                continue
            if chain.status != STATUS_OK or chain.product < threshold:
                reason = (chain.status if chain.status != STATUS_OK
                          else "below threshold")
                em.skip(cam, frame.frame_id,
                        f"filtered: {reason} (product={chain.product:.4f})")
                continue
            warped = warp_mask(ann.manual_mask, chain.composed)
            mask = _apply_exclusion(warped, ann, frame.frame_id,
                                    warped.provenance)
            em.emit(frame, mask, MODE_CORRECTED,
                    chain_length=len(chain.path) - 1,
                    response_product=chain.product)
    return em.finish()


# ---------------------------------------------------------------------------
# Annotation sidecar files: <dir>/<camera_id>.json referencing mask PNGs.
# ---------------------------------------------------------------------------


def load_annotations(ann_dir) -> dict:
    """Load per-camera annotation sidecars from a directory.

    Each ``<camera_id>.json`` holds ``reference_frame_id``, ``mask`` (path
    to the manual-mask PNG, relative to the sidecar), and optionally
    ``exclusions`` mapping frame_id to an exclusion-mask path.
    """
    ann_dir = Path(ann_dir)
    if not ann_dir.is_dir():
        raise DataIOError(f"annotation directory {ann_dir} does not exist")
    annotations = {}
    for sidecar in sorted(ann_dir.glob("*.json")):
        cam = sidecar.stem
        try:
            spec = json.loads(sidecar.read_text())
            ref = spec["reference_frame_id"]
            mask_path = ann_dir / spec["mask"]
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"malformed annotation {sidecar}: {exc}") from exc
        unknown = set(spec) - {"reference_frame_id", "mask", "exclusions"}
        if unknown:
            raise ConfigError(
                f"malformed annotation {sidecar}: unknown keys {sorted(unknown)}")
        manual = load_mask(mask_path, provenance=PROVENANCE_MANUAL,
                           source_frame_id=ref)
        exclusions = {}
        for fid, rel in sorted(spec.get("exclusions", {}).items()):
            exclusions[fid] = load_mask(ann_dir / rel,
                                        provenance=PROVENANCE_MANUAL,
                                        source_frame_id=fid)
        annotations[cam] = FeedAnnotation(camera_id=cam, reference_frame_id=ref,
                                          manual_mask=manual,
                                          exclusion_masks=exclusions)
    return annotations
