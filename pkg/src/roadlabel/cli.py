"""Operator-facing command line.

Subcommands map 1:1 onto the library modules: ``ingest`` (feed polling),
``register`` (one image pair), ``graph`` (build a feed's transform graph),
``chain`` (optimal chains from a saved graph), ``transfer`` (emit a
training-set variant), ``bench`` (synthetic drift benchmark), ``overlay``
(blend a mask over a frame for inspection).

Progress goes to the log stream (level from the ROADLABEL_LOG environment
variable); results go to files or stdout, so primary outputs stay diffable.
Errors print one JSON line to stderr and map to distinct exit codes:
0 ok, 2 config, 3 I/O, 4 validation, 5 registration/graph failure.
"""

import argparse
import contextlib
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from roadlabel import chaingraph, ingest, synthbench, transfer
from roadlabel.config import PipelineConfig, load_config
from roadlabel.errors import DataIOError, RoadLabelError
from roadlabel.imgcore import (
    Frame,
    load_feed,
    load_frame,
    load_mask,
    overlay_mask,
    save_frame,
)
from roadlabel.registration import register

log = logging.getLogger("roadlabel")

_LOCK_NAME = ".roadlabel.lock"


@contextlib.contextmanager
def _output_lock(out_dir: Path):
    """Guard an output directory against concurrent runs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / _LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataIOError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            lock.unlink()


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)
    if getattr(args, "threshold", None) is not None:
        cfg = replace(cfg, graph=replace(cfg.graph,
                                         response_threshold=args.threshold))
    return cfg


def _cmd_ingest(args) -> int:
    sources = ingest.load_sources(args.sources)
    root = Path(args.root)
    with _output_lock(root):
        records = ingest.run_poller(sources, root, iterations=args.iterations)
    ok = sum(1 for r in records if r.ok)
    print(f"polled {len(records)} fetches, {ok} stored, {len(records) - ok} failed")
    return 0


def _cmd_register(args) -> int:
    cfg = _load_cfg(args)
    src = load_frame(args.src, timestamp=0.0)
    dst = load_frame(args.dst, timestamp=0.0)
    res = register(src, dst, cfg.fm)
    t = res.transform
    print(f"scale={t.scale:.6f} rotation_deg={math.degrees(t.rotation):.4f} "
          f"tx={t.tx:.3f} ty={t.ty:.3f} response={res.response:.4f}")
    return 0


def _cmd_graph(args) -> int:
    cfg = _load_cfg(args)
    frames = load_feed(args.feed_dir)
    if args.subsample is not None:
        frames = ingest.subsample(frames, args.subsample, cfg.seed)
    graph, report = chaingraph.build_graph(frames, cfg.fm, cfg.graph,
                                           seed=cfg.seed,
                                           max_workers=cfg.workers)
    chaingraph.save_graph(graph, args.out)
    log.info("graph %s: %d frames, %d/%d edges registered", args.out,
             len(graph.frames), report.registered, report.planned)
    for i, j, reason in report.failures:
        log.warning("pair (%s, %s) failed: %s", i, j, reason)
    print(f"frames={len(graph.frames)} planned={report.planned} "
          f"edges={report.registered} failed={len(report.failures)}")
    return 0


def _cmd_chain(args) -> int:
    cfg = _load_cfg(args)
    graph = chaingraph.load_graph(args.graph)
    results = chaingraph.chain_all(graph, args.reference,
                                   threshold=cfg.graph.response_threshold)
    lines = []
    for r in results:
        rec = {"target": r.target_frame_id, "status": r.status,
               "product": r.product, "hops": max(len(r.path) - 1, 0)}
        if r.composed is not None:
            t = r.composed
            rec["transform"] = {"scale": t.scale, "rotation": t.rotation,
                                "tx": t.tx, "ty": t.ty}
        lines.append(json.dumps(rec, separators=(",", ":")))
    if args.out:
        Path(args.out).write_text("".join(line + "\n" for line in lines))
    else:
        for line in lines:
            print(line)
    return 0


def _cmd_transfer(args) -> int:
    cfg = _load_cfg(args)
    feeds_root = Path(args.feeds)
    if not feeds_root.is_dir():
        raise DataIOError(f"feeds root {feeds_root} does not exist")
    annotations = transfer.load_annotations(args.annotations)
    feeds = {}
    for cam_dir in sorted(p for p in feeds_root.iterdir() if p.is_dir()):
        frames = load_feed(cam_dir)
        if not frames:
            continue
        if cfg.subsample_fraction < 1.0:
            kept = ingest.subsample(frames, cfg.subsample_fraction, cfg.seed)
            ann = annotations.get(cam_dir.name)
            # the reference frame must survive sampling or there is nothing
            # to transfer from
            if ann is not None and all(f.frame_id != ann.reference_frame_id
                                       for f in kept):
                ref = next((f for f in frames
                            if f.frame_id == ann.reference_frame_id), None)
                if ref is not None:
                    kept.append(ref)
                    kept.sort(key=lambda f: (f.timestamp, f.frame_id))
            frames = kept
        feeds[cam_dir.name] = frames

    out_dir = Path(args.out)
    anns = list(annotations.values())
    with _output_lock(out_dir):
        if args.mode == transfer.MODE_BASELINE:
            manifest, report = transfer.emit_baseline(feeds, anns, out_dir)
        elif args.mode == transfer.MODE_REUSE:
            manifest, report = transfer.emit_reuse(feeds, anns, out_dir)
        else:
            chains = {}
            for cam, frames in feeds.items():
                ann = annotations.get(cam)
                if ann is None or all(f.frame_id != ann.reference_frame_id
                                      for f in frames):
                    continue  # emitters will report the skip
                graph, greport = chaingraph.build_graph(
                    frames, cfg.fm, cfg.graph, seed=cfg.seed,
                    max_workers=cfg.workers)
                log.info("camera %s: %d/%d edges", cam, greport.registered,
                         greport.planned)
                chains[cam] = chaingraph.chain_all(
                    graph, ann.reference_frame_id,
                    threshold=cfg.graph.response_threshold)
            manifest, report = transfer.emit_corrected(
                feeds, anns, chains, out_dir,
                threshold=cfg.graph.response_threshold)
    print(f"emitted={len(manifest.entries)} skipped={len(report.lines)} "
          f"out={out_dir}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    if args.scenario == "default":
        scenario = synthbench.DriftScenario()
    else:
        scenario = synthbench.load_scenario(args.scenario)
    if args.out:
        out = Path(args.out)
        with _output_lock(out):
            report = synthbench.run_benchmark(scenario, cfg.fm, cfg.graph,
                                              out_dir=out,
                                              max_workers=cfg.workers,
                                              overlays=args.overlays)
    else:
        report = synthbench.run_benchmark(scenario, cfg.fm, cfg.graph,
                                          max_workers=cfg.workers,
                                          overlays=args.overlays)
    sys.stdout.write(report.to_text())
    return 0


def _cmd_overlay(args) -> int:
    frame = load_frame(args.frame, timestamp=0.0)
    mask = load_mask(args.mask)
    blended = overlay_mask(frame, mask, alpha=args.alpha)
    save_frame(Frame(camera_id=frame.camera_id, frame_id=frame.frame_id,
                     timestamp=frame.timestamp, pixels=blended), args.out)
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="roadlabel",
        description="Transfer road labels across stationary-camera frames "
                    "via frequency-domain registration.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, seed=True):
        sp.add_argument("--config", help="pipeline config JSON")
        if seed:
            sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)

    sp = sub.add_parser("ingest", help="poll configured camera feeds")
    sp.add_argument("--sources", required=True, help="sources JSON file")
    sp.add_argument("--root", required=True, help="storage root directory")
    sp.add_argument("--iterations", type=int, default=1,
                    help="polls per source (default 1)")
    sp.set_defaults(func=_cmd_ingest, config=None)

    sp = sub.add_parser("register", help="register one image pair")
    sp.add_argument("src")
    sp.add_argument("dst")
    add_common(sp, seed=False)
    sp.set_defaults(func=_cmd_register)

    sp = sub.add_parser("graph", help="build a feed's transform graph")
    sp.add_argument("feed_dir")
    sp.add_argument("--out", required=True, help="graph file to write")
    sp.add_argument("--subsample", type=float, default=None,
                    help="frame fraction to keep before building")
    add_common(sp)
    sp.set_defaults(func=_cmd_graph)

    sp = sub.add_parser("chain", help="optimal chains from a saved graph")
    sp.add_argument("graph")
    sp.add_argument("reference", help="reference frame id")
    sp.add_argument("--threshold", type=float, default=None)
    sp.add_argument("--out", help="write NDJSON here instead of stdout")
    add_common(sp)
    sp.set_defaults(func=_cmd_chain)

    sp = sub.add_parser("transfer", help="emit a training-set variant")
    sp.add_argument("mode", choices=[transfer.MODE_BASELINE,
                                     transfer.MODE_REUSE,
                                     transfer.MODE_CORRECTED])
    sp.add_argument("--feeds", required=True, help="root of camera feed dirs")
    sp.add_argument("--annotations", required=True,
                    help="directory of per-camera annotation sidecars")
    sp.add_argument("--out", required=True)
    sp.add_argument("--threshold", type=float, default=None)
    add_common(sp)
    sp.set_defaults(func=_cmd_transfer)

    sp = sub.add_parser("bench", help="synthetic drift benchmark")
    sp.add_argument("scenario", help="scenario JSON file, or 'default'")
    sp.add_argument("--out", help="directory for datasets and report")
    sp.add_argument("--overlays", action="store_true",
                    help="write mask-over-frame PNGs")
    add_common(sp)
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("overlay", help="blend a mask over a frame")
    sp.add_argument("frame")
    sp.add_argument("mask")
    sp.add_argument("out")
    sp.add_argument("--alpha", type=float, default=0.45)
    sp.set_defaults(func=_cmd_overlay, config=None)

    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ROADLABEL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except RoadLabelError as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
