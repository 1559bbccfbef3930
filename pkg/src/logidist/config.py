"""Pipeline configuration: nested dataclasses loaded from JSON with flag overrides.

Schema (every key optional)::

    {
      "spec_path": "specs/phi_ex.psl",      # file, or the stem of a bundled spec
      "trace_dir": "traces/",
      "delta": 0.01, "eta": 0.0001, "max_depth": 20,
      "seed": 0, "output_dir": "out",
      "clustering": {"method": "agglomerative", "k": 3, "linkage": "complete"},
      "projection": {"angle_steps": 90, "tol": 0.0001},
      "dimred": {"bins": 20, "line": null},
      "casestudy": {"spec": "phi_ex_ticks", "line_angles": [0.46, 1.36],
                    "k": 5, "n_init": 10, "threshold": 0.3, "delta": 0.02}
    }
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .learn import LINKAGES

CLUSTER_METHODS = ("agglomerative", "gmm")


class ConfigError(ValueError):
    pass


@dataclass
class ClusteringConfig:
    method: str = "agglomerative"
    k: int = 3
    linkage: str = "complete"

    def validate(self):
        if self.method not in CLUSTER_METHODS:
            raise ConfigError(f"clustering.method must be one of {CLUSTER_METHODS}")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"clustering.linkage must be one of {LINKAGES}")
        if self.k < 1:
            raise ConfigError("clustering.k must be positive")


@dataclass
class ProjectionConfig:
    angle_steps: int = 90
    tol: float = 1e-4

    def validate(self):
        if self.angle_steps < 1:
            raise ConfigError("projection.angle_steps must be positive")
        if self.tol <= 0:
            raise ConfigError("projection.tol must be positive")


@dataclass
class DimredConfig:
    bins: int = 20
    # hyperspherical angles of the line; None means the main diagonal
    line: Optional[list] = None

    def validate(self):
        if self.bins < 1:
            raise ConfigError("dimred.bins must be positive")


@dataclass
class CaseStudyConfig:
    spec: str = "phi_ex_ticks"
    line_angles: list = field(default_factory=lambda: [0.46, 1.36])
    k: int = 5
    n_init: int = 10
    threshold: float = 0.3
    delta: float = 0.02

    def validate(self):
        if len(self.line_angles) != 2:
            raise ConfigError("casestudy.line_angles needs exactly two angles")
        if self.k < 1 or self.n_init < 1:
            raise ConfigError("casestudy.k and casestudy.n_init must be positive")
        if self.threshold <= 0 or self.delta <= 0:
            raise ConfigError("casestudy.threshold and casestudy.delta must be positive")


@dataclass
class PipelineConfig:
    spec_path: Optional[str] = None
    trace_dir: Optional[str] = None
    delta: float = 0.01
    eta: float = 1e-4
    max_depth: int = 20
    seed: int = 0
    output_dir: str = "out"
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    dimred: DimredConfig = field(default_factory=DimredConfig)
    casestudy: CaseStudyConfig = field(default_factory=CaseStudyConfig)

    def validate(self) -> "PipelineConfig":
        if self.delta <= 0 or self.eta <= 0:
            raise ConfigError("delta and eta must be positive")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be non-negative")
        for sub in (self.clustering, self.projection, self.dimred, self.casestudy):
            sub.validate()
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return _build(cls, data, "").validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        if default is not None and dataclasses.is_dataclass(default):
            kwargs[name] = _build(default, value, f"{prefix}{name}.")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read a JSON config (or defaults when ``path`` is None) and apply top-level overrides."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return PipelineConfig.from_dict(data)
