"""Periodic still-image collection from roadside camera endpoints.

Each configured source is fetched every ``poll_interval`` seconds (default
20 minutes) over plain HTTP(S). Images are stored append-only under
``<root>/<camera_id>/<unix_ts>.<ext>`` with a per-camera NDJSON manifest
recording timestamp, path, checksum, and flags. A fetch that returns the
same bytes as the previous frame is stored but flagged as a duplicate, so
downstream graph building can drop stale-feed frames cheaply.

Network access, clock, and sleeping are injectable for testing.
"""

import hashlib
import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from roadlabel.errors import ConfigError, ValidationError

_JPEG_MAGIC = b"\xff\xd8\xff"
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

_SOURCE_KEYS = {"camera_id", "url", "poll_interval", "enabled", "headers"}


@dataclass(frozen=True)
class FeedSource:
    camera_id: str
    url: str
    poll_interval: float = 1200.0  # 20 minutes
    enabled: bool = True
    headers: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.camera_id:
            raise ConfigError("camera_id must be non-empty")
        if self.poll_interval < 1.0:
            raise ConfigError(
                f"poll_interval must be >= 1 s, got {self.poll_interval}")


@dataclass(frozen=True)
class PollRecord:
    camera_id: str
    timestamp: int
    path: str | None
    status: int
    checksum: str | None
    duplicate: bool
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.path is not None


def load_sources(path) -> list:
    """Read the source list from a JSON config file."""
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read sources {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed sources {path}: {exc}") from exc
    if isinstance(spec, dict):
        spec = spec.get("sources")
    if not isinstance(spec, list):
        raise ConfigError(f"{path} must hold a list of sources")
    sources, seen = [], set()
    for rec in spec:
        unknown = set(rec) - _SOURCE_KEYS
        if unknown:
            raise ConfigError(f"unknown source keys: {sorted(unknown)}")
        src = FeedSource(**rec)
        if src.camera_id in seen:
            raise ConfigError(f"duplicate camera_id {src.camera_id!r}")
        seen.add(src.camera_id)
        sources.append(src)
    return sources


def _http_fetch(url: str, headers: dict) -> bytes:
    req = urllib.request.Request(url, headers=dict(headers))
    with urllib.request.urlopen(req, timeout=30.0) as resp:
        return resp.read()


def _last_checksum(manifest_path: Path) -> str | None:
    if not manifest_path.exists():
        return None
    checksum = None
    for line in manifest_path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("checksum"):
            checksum = rec["checksum"]
    return checksum


def _append_manifest(manifest_path: Path, record: dict) -> None:
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "a") as fh:
        fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def poll_once(source: FeedSource, root, *, fetch=None, clock=None,
              sleep=None, attempts: int = 3) -> PollRecord:
    """Fetch one frame from a source; never raises on network problems.

    HTTP and transport errors are retried with exponential backoff (1 s,
    2 s, ...) up to ``attempts`` tries, then recorded as a failure line in
    the camera's manifest. ``fetch``/``clock``/``sleep`` default to real
    HTTP and wall-clock time.
    """
    fetch = _http_fetch if fetch is None else fetch
    clock = time.time if clock is None else clock
    sleep = time.sleep if sleep is None else sleep
    root = Path(root)
    cam_dir = root / source.camera_id
    manifest = cam_dir / "manifest.ndjson"

    body, status, error = None, 0, None
    for attempt in range(attempts):
        try:
            body = fetch(source.url, source.headers)
            status = 200
            break
        except urllib.error.HTTPError as exc:
            status, error = exc.code, f"HTTP {exc.code}"
        except (urllib.error.URLError, OSError) as exc:
            status, error = 0, str(exc)
        if attempt < attempts - 1:
            sleep(2.0 ** attempt)

    ts = int(clock())
    if body is None:
        record = PollRecord(camera_id=source.camera_id, timestamp=ts, path=None,
                            status=status, checksum=None, duplicate=False,
                            error=error)
    elif body.startswith(_JPEG_MAGIC):
        record = _store(source, cam_dir, manifest, ts, body, ".jpg")
    elif body.startswith(_PNG_MAGIC):
        record = _store(source, cam_dir, manifest, ts, body, ".png")
    else:
        record = PollRecord(camera_id=source.camera_id, timestamp=ts, path=None,
                            status=status, checksum=None, duplicate=False,
                            error="response body is not a JPEG or PNG image")
    _append_manifest(manifest, {
        "timestamp": record.timestamp, "path": record.path,
        "status": record.status, "checksum": record.checksum,
        "duplicate": record.duplicate, "error": record.error,
    })
    return record


def _store(source, cam_dir: Path, manifest: Path, ts: int, body: bytes,
           ext: str) -> PollRecord:
    checksum = hashlib.sha256(body).hexdigest()
    duplicate = checksum == _last_checksum(manifest)
    while (cam_dir / f"{ts}{ext}").exists():
        ts += 1  # never overwrite: a restarted poller keeps appending
    path = cam_dir / f"{ts}{ext}"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body)
    return PollRecord(camera_id=source.camera_id, timestamp=ts,
                      path=str(path.relative_to(cam_dir.parent)), status=200,
                      checksum=checksum, duplicate=duplicate)


def poll_all(sources, root, **inject) -> list:
    """One polling pass over every enabled source."""
    return [poll_once(s, root, **inject) for s in sources if s.enabled]


def run_poller(sources, root, *, iterations: int = 1, fetch=None,
               clock=None, sleep=None, attempts: int = 3) -> list:
    """Poll each enabled source ``iterations`` times at its own interval.

    A simple earliest-deadline scheduler; with the default clock this runs
    for roughly ``iterations * max(poll_interval)`` seconds.
    """
    clock = time.time if clock is None else clock
    sleep = time.sleep if sleep is None else sleep
    active = [s for s in sources if s.enabled]
    records = []
    due = {s.camera_id: 0.0 for s in active}
    remaining = {s.camera_id: iterations for s in active}
    by_id = {s.camera_id: s for s in active}
    while any(n > 0 for n in remaining.values()):
        cam = min((c for c in due if remaining[c] > 0),
                  key=lambda c: (due[c], c))
        now = clock()
        if now < due[cam]:
            sleep(due[cam] - now)
        records.append(poll_once(by_id[cam], root, fetch=fetch, clock=clock,
                                 sleep=sleep, attempts=attempts))
        due[cam] = max(now, due[cam]) + by_id[cam].poll_interval
        remaining[cam] -= 1
    return records


def _camera_stream(seed: int, camera_id: str) -> np.random.Generator:
    digest = hashlib.sha256(camera_id.encode()).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big")])


def subsample(frames, fraction: float, seed: int = 0) -> list:
    """Seeded uniform sample of ``round(fraction * n)`` frames per camera.

    Frame order within each camera is preserved; the result is
    deterministic for fixed inputs and seed.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    by_camera = {}
    for f in frames:
        by_camera.setdefault(f.camera_id, []).append(f)
    out = []
    for cam in sorted(by_camera):
        group = by_camera[cam]
        k = int(round(fraction * len(group)))
        rng = _camera_stream(seed, cam)
        picks = sorted(rng.choice(len(group), size=k, replace=False))
        out.extend(group[i] for i in picks)
    return out
