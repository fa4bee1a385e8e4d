"""Service configuration: JSON or TOML file plus environment overrides."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8699
    sessions_dir: str = "sessions"
    extractor_path: str = ""
    generator_path: str = ""
    default_method: str = "chroma"
    timeout_s: float = 120.0

    def validate(self):
        if not (0 < self.port < 65536):
            raise ValueError(f"port out of range: {self.port}")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")


ENV_PREFIX = "MAKEUPLAB_"


def load_config(path=None, env=None) -> ServiceConfig:
    """Read config from a .json or .toml file; MAKEUPLAB_* environment
    variables override individual keys (e.g. MAKEUPLAB_PORT=9000)."""
    env = os.environ if env is None else env
    raw = {}
    if path:
        if str(path).endswith(".toml"):
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        else:
            with open(path) as f:
                raw = json.load(f)

    cfg_fields = {f.name: f.type for f in fields(ServiceConfig)}
    unknown = set(raw) - set(cfg_fields)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    for f in fields(ServiceConfig):
        key = ENV_PREFIX + f.name.upper()
        if key in env:
            raw[f.name] = env[key]

    kwargs = {}
    for f in fields(ServiceConfig):
        if f.name not in raw:
            continue
        value = raw[f.name]
        if f.default is not None and isinstance(f.default, bool):
            value = str(value).lower() in ("1", "true", "yes")
        elif isinstance(f.default, int):
            value = int(value)
        elif isinstance(f.default, float):
            value = float(value)
        else:
            value = str(value)
        kwargs[f.name] = value
    cfg = ServiceConfig(**kwargs)
    cfg.validate()
    return cfg
