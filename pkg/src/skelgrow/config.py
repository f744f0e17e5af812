"""Tunable parameters of the pipeline and the flat config-file loader."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class SearchConfig:
    """All tunable parameters of the skeletonization pipeline.

    Defaults follow the published parameter table; ``seed`` and
    ``max_iterations`` are artifact additions (``max_iterations`` <= 0 means
    "10x the superpoint count", resolved at search time).
    """

    r_super: float = 0.10
    alpha_tip: float = 0.60
    alpha_conf: float = 0.40
    theta_turn_min: float = math.pi / 4
    c_turn: float = 0.5
    p_turn: float = 2.0
    theta_grow_min: float = math.pi / 4
    c_grow: float = 0.3
    p_grow: float = 1.0
    K: int = 500
    k_max_rep: int = 3
    seed: int = 0
    max_iterations: int = 0

    def __post_init__(self):
        for name in ("r_super", "theta_turn_min", "theta_grow_min"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("alpha_conf", "alpha_tip"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must be in (0, 1), got {v}")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.k_max_rep < 1:
            raise ConfigError("k_max_rep must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    def resolve_max_iterations(self, n_nodes: int) -> int:
        if self.max_iterations > 0:
            return self.max_iterations
        return 10 * max(n_nodes, 1)


@dataclass(frozen=True)
class PipelineConfig:
    """Search parameters plus the optional axis-aligned crop box."""

    search: SearchConfig = dataclasses.field(default_factory=SearchConfig)
    crop_min: tuple[float, float, float] | None = None
    crop_max: tuple[float, float, float] | None = None


_SEARCH_KEYS = {f.name for f in dataclasses.fields(SearchConfig)}


def load_config(path: str | Path) -> PipelineConfig:
    """Load a flat-key JSON config file.

    Recognized keys are the ``SearchConfig`` field names plus ``crop.min``
    and ``crop.max``; anything else is an error.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object of flat keys")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> PipelineConfig:
    unknown = set(raw) - _SEARCH_KEYS - {"crop.min", "crop.max"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    search_kwargs = {k: raw[k] for k in raw if k in _SEARCH_KEYS}
    for key in ("K", "k_max_rep", "seed", "max_iterations"):
        if key in search_kwargs:
            v = search_kwargs[key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{key} must be an integer, got {v!r}")

    def _box(key):
        if key not in raw:
            return None
        v = raw[key]
        if (not isinstance(v, (list, tuple)) or len(v) != 3
                or not all(isinstance(x, (int, float)) for x in v)):
            raise ConfigError(f"{key} must be a list of 3 numbers")
        return tuple(float(x) for x in v)

    return PipelineConfig(
        search=SearchConfig(**search_kwargs),
        crop_min=_box("crop.min"),
        crop_max=_box("crop.max"),
    )
