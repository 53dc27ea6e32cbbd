"""Sparse registration graph over a feed and optimal transform chains.

Frames are grouped into batches of 24 by timestamp order. All within-batch
pairs are registered; between batches at distance d (1..8) only a gamma^d
proportion of pairs is registered, sampled uniformly with a recorded seed.
The chain from the reference frame to a target maximizes the product of
edge responses (equivalently: shortest path under weights -ln r), and a
chain whose product falls below the response threshold marks the target
frame as filtered.
"""

import heapq
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from roadlabel.errors import ConfigError, DataIOError, GraphError, RegistrationError
from roadlabel.imgcore import (
    DimensionMismatchError,
    Frame,
    SimilarityTransform,
    compose,
    invert,
    to_gray,
)
from roadlabel.registration import FMParams, precompute, register_gray

DEFAULT_BATCH_SIZE = 24
DEFAULT_GAMMA = 1.0 / 1.35
DEFAULT_MAX_BATCH_DISTANCE = 8
DEFAULT_RESPONSE_THRESHOLD = 0.45

STATUS_OK = "ok"
STATUS_FILTERED = "filtered"
STATUS_UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class GraphParams:
    batch_size: int = DEFAULT_BATCH_SIZE
    gamma: float = DEFAULT_GAMMA
    max_batch_distance: int = DEFAULT_MAX_BATCH_DISTANCE
    response_threshold: float = DEFAULT_RESPONSE_THRESHOLD

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.max_batch_distance < 0:
            raise ConfigError("max_batch_distance must be >= 0")
        if not 0.0 <= self.response_threshold <= 1.0:
            raise ConfigError("response_threshold must be in [0, 1]")


@dataclass(frozen=True)
class RegistrationEdge:
    """Undirected edge; ``transform`` maps frame ``i`` coords to frame ``j``."""

    i: str
    j: str
    transform: SimilarityTransform
    response: float

    def __post_init__(self):
        if self.i == self.j:
            raise GraphError(f"self-edge on frame {self.i!r}")
        if not 0.0 < self.response <= 1.0:
            raise GraphError(f"edge response must be in (0, 1], got {self.response}")


@dataclass(frozen=True)
class TransformGraph:
    frames: tuple  # ((frame_id, timestamp), ...) in timestamp order
    edges: tuple  # (RegistrationEdge, ...)
    batch_size: int = DEFAULT_BATCH_SIZE
    gamma: float = DEFAULT_GAMMA
    max_batch_distance: int = DEFAULT_MAX_BATCH_DISTANCE
    sampling_seed: int = 0

    @cached_property
    def frame_ids(self) -> tuple:
        return tuple(fid for fid, _ in self.frames)

    @cached_property
    def adjacency(self) -> dict:
        """frame_id -> list of (neighbor, weight, edge, forward)."""
        adj = {fid: [] for fid in self.frame_ids}
        for edge in self.edges:
            if edge.i not in adj or edge.j not in adj:
                raise GraphError(f"edge {edge.i}->{edge.j} references unknown frame")
            weight = -math.log(edge.response)
            adj[edge.i].append((edge.j, weight, edge, True))
            adj[edge.j].append((edge.i, weight, edge, False))
        return adj


@dataclass(frozen=True)
class ChainResult:
    target_frame_id: str
    path: tuple  # frame_id sequence from reference to target; empty if unreachable
    composed: SimilarityTransform | None  # maps reference coords to target coords
    product: float
    status: str


@dataclass(frozen=True)
class GraphBuildReport:
    planned: int
    registered: int
    failures: tuple  # ((frame_i, frame_j, reason), ...)


def plan_pairs(frame_ids, batch_size: int = DEFAULT_BATCH_SIZE,
               gamma: float = DEFAULT_GAMMA,
               max_batch_distance: int = DEFAULT_MAX_BATCH_DISTANCE,
               seed: int = 0) -> list:
    """Deterministic registration plan as a list of unordered id pairs.

    ``frame_ids`` must already be in timestamp order. All within-batch pairs
    are included; for batch distance d in [1, max] exactly
    ``ceil(gamma**d * N_d)`` pairs are drawn uniformly without replacement.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must be in (0, 1), got {gamma}")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    ids = list(frame_ids)
    by_distance = {}
    for i in range(len(ids)):
        bi = i // batch_size
        for j in range(i + 1, len(ids)):
            d = j // batch_size - bi
            if d > max_batch_distance:
                break  # j only grows from here, so does d
            by_distance.setdefault(d, []).append((i, j))
    rng = np.random.default_rng(seed)
    plan = []
    for d in sorted(by_distance):
        candidates = by_distance[d]
        if d == 0:
            chosen = candidates
        else:
            take = math.ceil(gamma ** d * len(candidates))
            picks = rng.choice(len(candidates), size=take, replace=False)
            chosen = [candidates[k] for k in sorted(picks)]
        plan.extend(chosen)
    return [(ids[i], ids[j]) for i, j in plan]


def build_graph(frames, fm: FMParams = FMParams(),
                params: GraphParams = GraphParams(), seed: int = 0,
                max_workers: int | None = None):
    """Register all planned pairs of a feed; returns (graph, build report).

    Registrations run on a thread pool (the FFT and warp kernels release the
    GIL); results are merged in plan order so the graph is deterministic for
    a fixed seed regardless of worker count.
    """
    ordered = sorted(frames, key=lambda f: (f.timestamp, f.frame_id))
    for f in ordered[1:]:
        if (f.width, f.height) != (ordered[0].width, ordered[0].height):
            raise DimensionMismatchError(
                f"frame {f.frame_id} is {f.width}x{f.height}, expected "
                f"{ordered[0].width}x{ordered[0].height}"
            )
    meta = tuple((f.frame_id, f.timestamp) for f in ordered)
    ids = [f.frame_id for f in ordered]
    if len(ordered) < 2:
        graph = TransformGraph(frames=meta, edges=(),
                               batch_size=params.batch_size, gamma=params.gamma,
                               max_batch_distance=params.max_batch_distance,
                               sampling_seed=seed)
        return graph, GraphBuildReport(planned=0, registered=0, failures=())

    pairs = plan_pairs(ids, params.batch_size, params.gamma,
                       params.max_batch_distance, seed)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        signatures = dict(zip(ids, pool.map(
            lambda f: precompute(to_gray(f), fm), ordered)))

        def run(pair):
            a, b = pair
            try:
                res = register_gray(signatures[a].gray, signatures[b].gray, fm,
                                    src_sig=signatures[a], dst_sig=signatures[b])
                return pair, res, None
            except RegistrationError as exc:
                return pair, None, f"{type(exc).__name__}: {exc}"

        outcomes = list(pool.map(run, pairs))

    edges, failures = [], []
    for (a, b), res, err in outcomes:
        if err is not None:
            failures.append((a, b, err))
        elif res.response <= 0.0:
            failures.append((a, b, "zero response"))
        else:
            edges.append(RegistrationEdge(i=a, j=b, transform=res.transform,
                                          response=res.response))
    graph = TransformGraph(frames=meta, edges=tuple(edges),
                           batch_size=params.batch_size, gamma=params.gamma,
                           max_batch_distance=params.max_batch_distance,
                           sampling_seed=seed)
    return graph, GraphBuildReport(planned=len(pairs), registered=len(edges),
                                   failures=tuple(failures))


def _search(g: TransformGraph, reference: str) -> dict:
    """Single-source shortest path under weights -ln r.

    Returns frame_id -> (distance, hops, predecessor, edge, forward). Ties in
    distance prefer fewer hops, then the lexicographically smaller
    predecessor, making path choice deterministic.
    """
    adj = g.adjacency
    if reference not in adj:
        raise GraphError(f"reference frame {reference!r} not in graph")
    best = {reference: (0.0, 0, None, None, True)}
    heap = [(0.0, 0, reference)]
    while heap:
        dist, hops, u = heapq.heappop(heap)
        cur = best.get(u)
        if cur is None or (dist, hops) > (cur[0], cur[1]):
            continue  # stale heap entry
        for v, weight, edge, forward in adj[u]:
            nd = dist + weight
            nh = hops + 1
            old = best.get(v)
            if old is None or (nd, nh) < (old[0], old[1]) or (
                    nd == old[0] and nh == old[1]
                    and old[2] is not None and u < old[2]):
                best[v] = (nd, nh, u, edge, forward)
                heapq.heappush(heap, (nd, nh, v))
    return best


def _result_for(g, best, reference, target, threshold):
    if target not in g.adjacency:
        raise GraphError(f"target frame {target!r} not in graph")
    if target == reference:
        return ChainResult(target_frame_id=target, path=(reference,),
                           composed=SimilarityTransform.identity(),
                           product=1.0, status=STATUS_OK)
    if target not in best:
        return ChainResult(target_frame_id=target, path=(), composed=None,
                           product=0.0, status=STATUS_UNREACHABLE)
    hops = []
    node = target
    while node != reference:
        _, _, pred, edge, forward = best[node]
        hops.append((edge, forward))
        node = pred
    hops.reverse()
    composed = SimilarityTransform.identity()
    product = 1.0
    path = [reference]
    for edge, forward in hops:
        step = edge.transform if forward else invert(edge.transform)
        composed = compose(composed, step)
        product *= edge.response
        path.append(edge.j if forward else edge.i)
    status = STATUS_OK if product >= threshold else STATUS_FILTERED
    return ChainResult(target_frame_id=target, path=tuple(path),
                       composed=composed, product=product, status=status)


def optimal_chain(g: TransformGraph, reference: str, target: str,
                  threshold: float = DEFAULT_RESPONSE_THRESHOLD) -> ChainResult:
    """Best chain of transforms from reference to target (max response product)."""
    best = _search(g, reference)
    return _result_for(g, best, reference, target, threshold)


def chain_all(g: TransformGraph, reference: str,
              threshold: float = DEFAULT_RESPONSE_THRESHOLD) -> list:
    """Chains for every non-reference frame, from one shortest-path run."""
    best = _search(g, reference)
    return [_result_for(g, best, reference, fid, threshold)
            for fid in g.frame_ids if fid != reference]


# ---------------------------------------------------------------------------
# Persistence: one header line with params and frame list, then one edge per
# line (i, j, scale, rotation, tx, ty, response) tab-separated. repr() floats
# round-trip exactly, so save/load is lossless.
# ---------------------------------------------------------------------------

_MAGIC = "#roadlabel-graph v1 "


def save_graph(g: TransformGraph, path) -> None:
    path = Path(path)
    header = {
        "batch_size": g.batch_size,
        "gamma": g.gamma,
        "max_batch_distance": g.max_batch_distance,
        "sampling_seed": g.sampling_seed,
        "frames": [[fid, ts] for fid, ts in g.frames],
    }
    lines = [_MAGIC + json.dumps(header, separators=(",", ":"))]
    for e in g.edges:
        t = e.transform
        lines.append("\t".join([
            e.i, e.j, repr(t.scale), repr(t.rotation),
            repr(t.tx), repr(t.ty), repr(e.response),
        ]))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write graph {path}: {exc}") from exc


def load_graph(path) -> TransformGraph:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataIOError(f"cannot read graph {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise DataIOError(f"{path} is not a transform-graph file")
    try:
        header = json.loads(lines[0][len(_MAGIC):])
        frames = tuple((fid, float(ts)) for fid, ts in header["frames"])
        edges = []
        for line in lines[1:]:
            if not line.strip():
                continue
            i, j, s, rot, tx, ty, r = line.split("\t")
            edges.append(RegistrationEdge(
                i=i, j=j,
                transform=SimilarityTransform(scale=float(s), rotation=float(rot),
                                              tx=float(tx), ty=float(ty)),
                response=float(r)))
    except (KeyError, ValueError) as exc:
        raise DataIOError(f"malformed graph file {path}: {exc}") from exc
    return TransformGraph(frames=frames, edges=tuple(edges),
                          batch_size=int(header["batch_size"]),
                          gamma=float(header["gamma"]),
                          max_batch_distance=int(header["max_batch_distance"]),
                          sampling_seed=int(header["sampling_seed"]))
