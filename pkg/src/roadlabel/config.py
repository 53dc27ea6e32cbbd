"""Pipeline configuration: one JSON file, overridable by CLI flags."""

import json
from dataclasses import dataclass, fields
from pathlib import Path

from roadlabel.chaingraph import GraphParams
from roadlabel.errors import ConfigError
from roadlabel.registration import FMParams


@dataclass(frozen=True)
class PipelineConfig:
    data_root: str = "data"
    output_root: str = "out"
    fm: FMParams = FMParams()
    graph: GraphParams = GraphParams()
    seed: int = 0
    subsample_fraction: float = 1.0
    workers: int | None = None

    def __post_init__(self):
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ConfigError(
                f"subsample_fraction must be in (0, 1], got {self.subsample_fraction}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def _build(cls, spec: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    return cls(**spec)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    known = {"data_root", "output_root", "registration", "graph", "seed",
             "subsample_fraction", "workers"}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    fm = _build(FMParams, spec.get("registration", {}), "registration")
    graph = _build(GraphParams, spec.get("graph", {}), "graph")
    return PipelineConfig(
        data_root=spec.get("data_root", "data"),
        output_root=spec.get("output_root", "out"),
        fm=fm, graph=graph,
        seed=spec.get("seed", 0),
        subsample_fraction=spec.get("subsample_fraction", 1.0),
        workers=spec.get("workers"),
    )
