"""Run configuration: one serializable record of every path, hyperparameter,
and seed a pipeline run uses. Embedded verbatim in the artifacts a run
produces so experiments can be replayed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .embedding import DEFAULT_BOUNDARIES, DEFAULT_MAX_SEQ_LEN
from .errors import UsageError
from .recommend import DEFAULT_GRID, DEFAULT_TAU


@dataclass
class RunConfig:
    # paths
    corpus: str | None = None
    store: str | None = None
    bundle: str | None = None
    model: str | None = None
    report: str | None = None
    # ingestion
    min_tag_freq: int = 50
    test_size: int = 1000
    # embedding geometry
    boundaries: tuple[int, ...] = DEFAULT_BOUNDARIES
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN
    # head
    region_sizes: tuple[int, ...] = (2, 3, 4)
    filters_per_region: int = 50
    hidden_units: int = 256
    # training
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    patience: int = 10
    val_fraction: float = 0.1
    # recommendation / evaluation
    tau: float = DEFAULT_TAU
    k: int = 10
    grid: tuple[float, ...] = DEFAULT_GRID
    denominator: str = "effective"
    # reproducibility
    seed: int = 0

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        for key, value in doc.items():
            if isinstance(value, tuple):
                doc[key] = list(value)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        for key in ("boundaries", "region_sizes", "grid"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        return cls.from_dict(doc)

    def override(self, **kwargs) -> "RunConfig":
        """New config with every non-None kwarg replacing the field."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return dataclasses.replace(self, **updates)
