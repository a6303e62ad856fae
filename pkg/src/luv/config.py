"""Application configuration: one JSON file, overridable flag by flag.

The `LUV_CONFIG` environment variable points at the file; commands start
from it and apply their own flags on top.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple

ENV_VAR = "LUV_CONFIG"

CAMERA_KINDS = ("sim", "replay")


class ConfigError(Exception):
    """Unreadable, malformed, or inconsistent configuration."""


@dataclass(frozen=True)
class AppConfig:
    dataset_root: str = "dataset"
    profile_path: Optional[str] = None
    camera: str = "sim"
    replay_paths: Tuple[str, ...] = ()
    uv_plug: Optional[str] = None
    ambient_plug: Optional[str] = None
    service_port: int = 8878
    seed: int = 0
    scene_kind: str = "multi"
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.camera not in CAMERA_KINDS:
            raise ConfigError(f"camera must be one of {CAMERA_KINDS}, got {self.camera!r}")
        if not (0 < self.service_port < 65536):
            raise ConfigError(f"service_port out of range: {self.service_port}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "dataset_root": self.dataset_root,
            "profile_path": self.profile_path,
            "camera": self.camera,
            "replay_paths": list(self.replay_paths),
            "uv_plug": self.uv_plug,
            "ambient_plug": self.ambient_plug,
            "service_port": self.service_port,
            "seed": self.seed,
            "scene_kind": self.scene_kind,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AppConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "replay_paths" in kwargs:
            kwargs["replay_paths"] = tuple(kwargs["replay_paths"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "AppConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_env(cls) -> "AppConfig":
        path = os.environ.get(ENV_VAR)
        if path:
            return cls.load(path)
        return cls()

    def override(self, **kwargs) -> "AppConfig":
        """New config with the non-None entries of kwargs applied."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates)

    def check_paths(self) -> None:
        """Referenced files must exist before a command starts real work."""
        if self.profile_path is not None and not Path(self.profile_path).exists():
            raise ConfigError(f"profile not found: {self.profile_path}")
        for p in self.replay_paths:
            if not Path(p).exists():
                raise ConfigError(f"replay image not found: {p}")
