"""Synthetic camera-drift benchmark with ground-truth transforms and masks.

A scenario renders a fixed scene (a trapezoidal road over band-limited
value noise), then simulates a camera whose pose performs a small random
walk: frame k is the scene warped by the cumulative transform T_k plus
photometric jitter. Because every T_k is known, registration, chaining,
and label transfer can all be scored exactly.

Unless a scenario is marked ``stress``, the cumulative drift is clamped to
a safe box well inside the registration module's documented recoverable
range (|rot| <= 15 deg, scale in [0.85, 1.18], |t| <= 25% of image size),
so failures indicate bugs rather than impossible inputs.
"""

import json
import math
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from roadlabel.chaingraph import GraphParams, build_graph, chain_all
from roadlabel.errors import ConfigError, DataIOError, DimensionMismatchError, ValidationError
from roadlabel.imgcore import (
    Frame,
    LabelMask,
    PROVENANCE_MANUAL,
    SimilarityTransform,
    load_mask,
    overlay_mask,
    save_frame,
    warp_image,
    warp_mask,
)
from roadlabel.registration import FMParams
from roadlabel.transfer import (
    DatasetManifest,
    FeedAnnotation,
    emit_corrected,
    emit_reuse,
)

# Cumulative-drift clamp for non-stress scenarios (see module docstring).
SAFE_TRANSLATION_FRACTION = 0.20
SAFE_ROTATION_RAD = 0.20
SAFE_LOG_SCALE = (math.log(0.88), math.log(1.14))


@dataclass(frozen=True)
class DriftScenario:
    name: str = "synth"
    width: int = 256
    height: int = 256
    n_frames: int = 6
    seed: int = 0
    # per-frame random-walk standard deviations
    walk_tx_std: float = 1.5
    walk_ty_std: float = 1.5
    walk_rot_std: float = 0.004
    walk_scale_std: float = 0.002
    # photometric perturbation ranges
    brightness_jitter: float = 0.02
    contrast_jitter: float = 0.03
    noise_std: float = 0.005
    occlusion_fraction: float = 0.0
    texture_amplitude: float = 0.6
    stress: bool = False

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ConfigError("scenario images must be at least 32x32")
        if self.n_frames < 1:
            raise ConfigError("scenario needs at least one frame")


@dataclass(frozen=True)
class SyntheticFeed:
    scenario: DriftScenario
    frames: list  # Frame per time step
    transforms: list  # T_k mapping the base scene onto frame k; T_0 = identity
    masks: list  # ground-truth road mask per frame

    @property
    def camera_id(self) -> str:
        return self.scenario.name

    @property
    def reference_frame_id(self) -> str:
        return self.frames[0].frame_id

    def reference_annotation(self) -> FeedAnnotation:
        return FeedAnnotation(camera_id=self.camera_id,
                              reference_frame_id=self.reference_frame_id,
                              manual_mask=self.masks[0])


def noise_texture(width: int, height: int, seed: int,
                  cells=(8, 16, 32, 64)) -> np.ndarray:
    """Band-limited value noise in [0, 1]: summed bilinear octaves."""
    rng = np.random.default_rng(seed)
    out = np.zeros((height, width))
    for c in cells:
        coarse = rng.standard_normal((c + 1, c + 1))
        ys = np.linspace(0.0, c, height)
        xs = np.linspace(0.0, c, width)
        y0 = np.clip(ys.astype(int), 0, c - 1)
        x0 = np.clip(xs.astype(int), 0, c - 1)
        fy = (ys - y0)[:, None]
        fx = (xs - x0)[None, :]
        top = coarse[np.ix_(y0, x0)] * (1 - fx) + coarse[np.ix_(y0, x0 + 1)] * fx
        bot = coarse[np.ix_(y0 + 1, x0)] * (1 - fx) + coarse[np.ix_(y0 + 1, x0 + 1)] * fx
        out += (top * (1 - fy) + bot * fy) / math.sqrt(c)
    out -= out.min()
    peak = out.max()
    if peak > 0:
        out /= peak
    return out


def _road_polygon(width: int, height: int) -> np.ndarray:
    """Trapezoid widening toward the bottom edge, like a road seen head-on."""
    bits = np.zeros((height, width), dtype=bool)
    y_top = 0.35 * height
    for y in range(int(math.ceil(y_top)), height):
        frac = (y - y_top) / max(height - 1 - y_top, 1.0)
        left = (0.42 + frac * (0.15 - 0.42)) * width
        right = (0.58 + frac * (0.85 - 0.58)) * width
        bits[y, int(round(left)):int(round(right)) + 1] = True
    return bits


def make_scene(scenario: DriftScenario):
    """Base gray image plus its ground-truth road mask."""
    if scenario.texture_amplitude <= 0.0:
        raise ValidationError(
            "scenario has no texture; registration cannot work on flat images")
    tex = noise_texture(scenario.width, scenario.height, scenario.seed)
    img = 0.55 + scenario.texture_amplitude * (tex - 0.5)
    road = _road_polygon(scenario.width, scenario.height)
    # dark road surface that keeps some texture, bright edge lines, and a
    # dashed center line — strong broadband structure for registration
    img[road] = 0.10 + 0.35 * img[road]
    edges = road ^ np.roll(road, 2, axis=1) | (road ^ np.roll(road, -2, axis=1))
    img[edges & road] = 0.85
    h, w = img.shape
    y_top = int(math.ceil(0.35 * h))
    for y in range(y_top, h):
        if (y // 6) % 2 == 0:
            cx = int(round(0.5 * w))
            img[y, max(cx - 1, 0):cx + 1] = 0.9
    return np.clip(img, 0.0, 1.0), road


def generate_feed(scenario: DriftScenario) -> SyntheticFeed:
    """Render the scenario; deterministic for a fixed seed."""
    base, road = make_scene(scenario)
    h, w = base.shape
    base_mask = LabelMask(bits=road, provenance=PROVENANCE_MANUAL,
                          source_frame_id="000000")
    rng = np.random.default_rng(scenario.seed)
    t_max = SAFE_TRANSLATION_FRACTION * min(w, h)

    frames, transforms, masks = [], [], []
    tx = ty = rot = log_s = 0.0
    for k in range(scenario.n_frames):
        if k > 0:
            tx += rng.normal(0.0, scenario.walk_tx_std)
            ty += rng.normal(0.0, scenario.walk_ty_std)
            rot += rng.normal(0.0, scenario.walk_rot_std)
            log_s += rng.normal(0.0, scenario.walk_scale_std)
            if not scenario.stress:
                tx = float(np.clip(tx, -t_max, t_max))
                ty = float(np.clip(ty, -t_max, t_max))
                rot = float(np.clip(rot, -SAFE_ROTATION_RAD, SAFE_ROTATION_RAD))
                log_s = float(np.clip(log_s, *SAFE_LOG_SCALE))
        t_k = SimilarityTransform(scale=math.exp(log_s), rotation=rot,
                                  tx=tx, ty=ty)
        img = warp_image(base, t_k) if k > 0 else base.copy()

        contrast = 1.0 + rng.uniform(-scenario.contrast_jitter,
                                     scenario.contrast_jitter)
        brightness = rng.uniform(-scenario.brightness_jitter,
                                 scenario.brightness_jitter)
        img = contrast * (img - 0.5) + 0.5 + brightness
        if scenario.noise_std > 0.0:
            img = img + rng.normal(0.0, scenario.noise_std, img.shape)
        if scenario.occlusion_fraction > 0.0:
            target = scenario.occlusion_fraction * w * h
            covered = 0.0
            while covered < target:
                rw = int(rng.uniform(0.08, 0.20) * w)
                rh = int(rng.uniform(0.08, 0.20) * h)
                x0 = int(rng.uniform(0, w - rw))
                y0 = int(rng.uniform(0, h - rh))
                img[y0:y0 + rh, x0:x0 + rw] = rng.random((rh, rw))
                covered += rw * rh
        img = np.clip(img, 0.0, 1.0)

        frames.append(Frame(
            camera_id=scenario.name, frame_id=f"{k:06d}",
            timestamp=1200.0 * k,
            pixels=np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)))
        transforms.append(t_k)
        masks.append(base_mask if k == 0 else warp_mask(base_mask, t_k))
    return SyntheticFeed(scenario=scenario, frames=frames,
                         transforms=transforms, masks=masks)


# ---------------------------------------------------------------------------
# Segmentation metrics.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    iou: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "MetricsReport":
        # Degenerate denominators: an empty prediction against empty truth is
        # a perfect match (1.0); f1 is 0 when precision+recall is 0.
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / (tp + fn) if tp + fn else 1.0
        iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
        f1 = (2.0 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        return cls(iou=iou, precision=precision, recall=recall, f1=f1,
                   tp=tp, fp=fp, fn=fn, tn=tn)


def evaluate_masks(predicted: LabelMask, truth: LabelMask) -> MetricsReport:
    if predicted.bits.shape != truth.bits.shape:
        raise DimensionMismatchError(
            f"evaluate_masks: {predicted.bits.shape} vs {truth.bits.shape}")
    p, t = predicted.bits, truth.bits
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(np.count_nonzero(~p & ~t))
    return MetricsReport.from_counts(tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# End-to-end benchmark run.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameOutcome:
    frame_id: str
    status: str
    chain_length: int
    product: float
    translation_error_px: float | None
    rotation_error_deg: float | None
    scale_error: float | None
    corrected_iou: float | None
    reuse_iou: float


@dataclass(frozen=True)
class BenchmarkReport:
    scenario: str
    n_frames: int
    emitted: int
    filter_rate: float
    mean_corrected_iou: float
    mean_reuse_iou: float
    outcomes: tuple

    def to_text(self) -> str:
        lines = [
            f"scenario\t{self.scenario}",
            f"frames\t{self.n_frames}",
            f"corrected_emitted\t{self.emitted}",
            f"filter_rate\t{self.filter_rate:.4f}",
            f"mean_corrected_iou\t{self.mean_corrected_iou:.6f}",
            f"mean_reuse_iou\t{self.mean_reuse_iou:.6f}",
            "frame\tstatus\thops\tproduct\tterr_px\troterr_deg\tserr\tcorr_iou\treuse_iou",
        ]
        for o in self.outcomes:
            fmt = lambda v, spec: ("-" if v is None else format(v, spec))
            lines.append("\t".join([
                o.frame_id, o.status, str(o.chain_length),
                format(o.product, ".4f"),
                fmt(o.translation_error_px, ".3f"),
                fmt(o.rotation_error_deg, ".3f"),
                fmt(o.scale_error, ".5f"),
                fmt(o.corrected_iou, ".4f"),
                format(o.reuse_iou, ".4f"),
            ]))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())


def run_benchmark(scenario: DriftScenario, fm: FMParams = FMParams(),
                  params: GraphParams = GraphParams(),
                  out_dir=None, max_workers: int | None = None,
                  overlays: bool = False) -> BenchmarkReport:
    """Generate a feed, run graph -> chains -> emission, score vs truth."""
    if out_dir is None:
        with tempfile.TemporaryDirectory(prefix="roadlabel-bench-") as tmp:
            return run_benchmark(scenario, fm, params, out_dir=tmp,
                                 max_workers=max_workers, overlays=overlays)
    out_dir = Path(out_dir)
    feed = generate_feed(scenario)
    graph, _ = build_graph(feed.frames, fm, params, seed=scenario.seed,
                           max_workers=max_workers)
    chains = chain_all(graph, feed.reference_frame_id,
                       threshold=params.response_threshold)
    feeds = {feed.camera_id: feed.frames}
    anns = [feed.reference_annotation()]
    corrected, _ = emit_corrected(feeds, anns, {feed.camera_id: chains},
                                  out_dir / "corrected",
                                  threshold=params.response_threshold)
    emit_reuse(feeds, anns, out_dir / "reuse")

    by_target = {c.target_frame_id: c for c in chains}
    emitted_ids = {Path(e.mask_path).name.removesuffix(".mask.png")
                   for e in corrected.entries}
    outcomes = []
    corr_ious, reuse_ious = [], []
    for k in range(1, scenario.n_frames):
        frame = feed.frames[k]
        truth = feed.masks[k]
        reuse_metrics = evaluate_masks(
            load_mask(out_dir / "reuse" / feed.camera_id /
                      f"{frame.frame_id}.mask.png"), truth)
        chain = by_target.get(frame.frame_id)
        status = chain.status if chain is not None else "missing"
        corr_iou = terr = roterr = serr = None
        hops = 0
        product = 0.0
        if chain is not None:
            product = chain.product
            hops = max(len(chain.path) - 1, 0)
            if chain.composed is not None:
                t_true = feed.transforms[k]
                t_got = chain.composed
                terr = math.hypot(t_got.tx - t_true.tx, t_got.ty - t_true.ty)
                roterr = abs(math.degrees(t_got.rotation - t_true.rotation))
                serr = abs(t_got.scale - t_true.scale) / t_true.scale
        if frame.frame_id in emitted_ids:
            corr_mask = load_mask(out_dir / "corrected" / feed.camera_id /
                                  f"{frame.frame_id}.mask.png")
            corr_iou = evaluate_masks(corr_mask, truth).iou
            corr_ious.append(corr_iou)
            reuse_ious.append(reuse_metrics.iou)
            if overlays:
                png = overlay_mask(frame, corr_mask)
                save_frame(Frame(camera_id=feed.camera_id,
                                 frame_id=frame.frame_id,
                                 timestamp=frame.timestamp, pixels=png),
                           out_dir / "overlays" / f"{frame.frame_id}.png")
        outcomes.append(FrameOutcome(
            frame_id=frame.frame_id, status=status, chain_length=hops,
            product=product, translation_error_px=terr,
            rotation_error_deg=roterr, scale_error=serr,
            corrected_iou=corr_iou, reuse_iou=reuse_metrics.iou))

    n_targets = max(scenario.n_frames - 1, 1)
    report = BenchmarkReport(
        scenario=scenario.name, n_frames=scenario.n_frames,
        emitted=len(corr_ious),
        filter_rate=1.0 - len(corr_ious) / n_targets,
        mean_corrected_iou=float(np.mean(corr_ious)) if corr_ious else 0.0,
        mean_reuse_iou=float(np.mean(reuse_ious)) if reuse_ious else 0.0,
        outcomes=tuple(outcomes))
    report.write(out_dir / "benchmark.txt")
    return report


def load_scenario(path) -> DriftScenario:
    """Read a scenario from a JSON file; unknown keys are rejected."""
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except OSError as exc:
        raise DataIOError(f"cannot read scenario {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed scenario {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError(f"scenario {path} must be a JSON object")
    known = {f.name for f in fields(DriftScenario)}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    return replace(DriftScenario(), **spec)
