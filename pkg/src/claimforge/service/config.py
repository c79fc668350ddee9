"""Service configuration: JSON file plus CLAIMFORGE_ environment overrides."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

from ..errors import InvalidConfigError, IoError

ENV_PREFIX = "CLAIMFORGE_"


@dataclass(frozen=True)
class ServiceConfig:
    vocab_path: str = ""
    forward_checkpoint: str = ""
    backward_checkpoint: str = ""
    relevancy_checkpoint: str = ""
    journal_path: str = "claimforge-journal.jsonl"
    host: str = "127.0.0.1"
    port: int = 8137
    session_ttl_hours: float = 24.0
    lambda_weight: float = 1.0
    oversample_factor: int = 4

    def __post_init__(self):
        if self.port < 1 or self.port > 65535:
            raise InvalidConfigError(f"port {self.port} outside [1, 65535]")
        if self.session_ttl_hours <= 0:
            raise InvalidConfigError(
                f"session_ttl_hours must be > 0, got {self.session_ttl_hours}")
        if self.oversample_factor < 1:
            raise InvalidConfigError(
                f"oversample_factor must be >= 1, got "
                f"{self.oversample_factor}")


def load_config(path=None, env=None) -> ServiceConfig:
    """File values, then environment overrides, then defaults.

    Every field can be overridden with CLAIMFORGE_<FIELD> (upper-cased);
    numeric fields are parsed to the field's type.
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise IoError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise IoError(f"config {path} is not valid JSON: {e}") from e
        unknown = set(data) - {f.name for f in fields(ServiceConfig)}
        if unknown:
            raise InvalidConfigError(
                f"unknown config keys: {sorted(unknown)}")

    env = os.environ if env is None else env
    for f in fields(ServiceConfig):
        raw = env.get(ENV_PREFIX + f.name.upper())
        if raw is None:
            continue
        if f.type in ("int", int):
            try:
                data[f.name] = int(raw)
            except ValueError:
                raise InvalidConfigError(
                    f"{ENV_PREFIX}{f.name.upper()}={raw!r} is not an integer")
        elif f.type in ("float", float):
            try:
                data[f.name] = float(raw)
            except ValueError:
                raise InvalidConfigError(
                    f"{ENV_PREFIX}{f.name.upper()}={raw!r} is not a number")
        else:
            data[f.name] = raw
    return ServiceConfig(**data)
