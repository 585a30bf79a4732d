"""Engine configuration: defaults, config file, then command-line flags."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

from .bandit import DEFAULT_EXPLORATION
from .errors import ConfigError
from .pipeline import PipelineSettings
from .refinement import RefinementConfig


@dataclass(frozen=True)
class EngineConfig:
    T: int = 4
    max_retries: int = 3
    tau_l: float = 75.0
    tau_k: float = 75.0
    exploration_constant: float = 1.41421356
    scenes: int = 4
    runtime_s: float = 12.0
    backends: str | None = None
    seed: int = 0
    jobs: int = 1
    scene_jobs: int = 4
    out_dir: str = "runs"
    muxer: str | None = None
    warm_start: bool = True
    prior_weight: float = 1.0
    sim_env: str | None = None

    def __post_init__(self):
        ints = {"T": 1, "max_retries": 0, "scenes": 1, "jobs": 1, "scene_jobs": 1}
        for name, lo in ints.items():
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")
        for name in ("tau_l", "tau_k"):
            if not 0 <= getattr(self, name) <= 100:
                raise ConfigError(f"{name} must lie in [0, 100]")
        for name in ("exploration_constant", "runtime_s", "prior_weight"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive real, got {v!r}")

    def settings(self) -> PipelineSettings:
        return PipelineSettings(
            iterations=self.T,
            scene_count=self.scenes,
            runtime_s=float(self.runtime_s),
            storyline=RefinementConfig(self.tau_l, self.max_retries),
            keyframes=RefinementConfig(self.tau_k, self.max_retries),
            warm_start=self.warm_start,
            prior_weight=self.prior_weight,
            scene_jobs=self.scene_jobs,
            muxer=self.muxer,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_NAMES = {f.name for f in fields(EngineConfig)}


def load_config_file(path: str | Path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from None
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{p}: not valid {'JSON' if p.suffix == '.json' else 'YAML'}: {exc}") from None
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: expected a mapping at the top level")
    unknown = sorted(set(data) - _NAMES)
    if unknown:
        raise ConfigError(f"{p}: unknown key(s) {unknown}")
    base = p.parent
    for key in ("backends", "sim_env"):
        if data.get(key):
            data[key] = str((base / data[key]).resolve())
    return data


def resolve_config(file_values: dict | None = None, flag_values: dict | None = None) -> EngineConfig:
    """Flags override the config file, which overrides the defaults."""
    cfg = EngineConfig()
    try:
        if file_values:
            cfg = replace(cfg, **file_values)
        if flag_values:
            cfg = replace(cfg, **{k: v for k, v in flag_values.items() if v is not None})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
