"""Engine configuration: `aits.toml` < `AITS_*` environment < command-line flags."""

from __future__ import annotations

import os
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import tomli

from aits.errors import ConfigError

DEFAULT_CONFIG_FILE = "aits.toml"

# key -> (env var, parser)
_ENV = {
    "ontology_path": "AITS_ONTOLOGY",
    "catalogue_paths": "AITS_CATALOGUE",
    "timeout_seconds": "AITS_TIMEOUT_SECONDS",
    "max_parallel_tools": "AITS_MAX_PARALLEL_TOOLS",
    "gap_threshold": "AITS_GAP_THRESHOLD",
    "output_dir": "AITS_OUTPUT_DIR",
    "subject": "AITS_SUBJECT",
}
_FILE_KEYS = {
    "ontology": "ontology_path",
    "ontology_path": "ontology_path",
    "catalogue": "catalogue_paths",
    "catalogue_paths": "catalogue_paths",
    "timeout_seconds": "timeout_seconds",
    "max_parallel_tools": "max_parallel_tools",
    "gap_threshold": "gap_threshold",
    "output_dir": "output_dir",
    "subject": "subject",
}


@dataclass(frozen=True)
class EngineConfig:
    ontology_path: Path | None = None
    catalogue_paths: tuple[Path, ...] = ()
    timeout_seconds: int = 300
    max_parallel_tools: int = 4
    gap_threshold: float = 0.25
    output_dir: Path = Path("aits-out")
    subject: str | None = None

    def __post_init__(self) -> None:
        if isinstance(self.timeout_seconds, bool) or not isinstance(self.timeout_seconds, int) \
                or self.timeout_seconds <= 0:
            raise ConfigError(f"timeout_seconds must be a positive integer, got {self.timeout_seconds!r}")
        if isinstance(self.max_parallel_tools, bool) or not isinstance(self.max_parallel_tools, int) \
                or self.max_parallel_tools <= 0:
            raise ConfigError(f"max_parallel_tools must be a positive integer, got {self.max_parallel_tools!r}")
        if not 0.0 <= self.gap_threshold <= 1.0:
            raise ConfigError(f"gap_threshold must lie in [0, 1], got {self.gap_threshold!r}")


def _coerce(key: str, value: Any, base: Path | None = None) -> Any:
    def path(v: Any) -> Path:
        p = Path(v)
        return base / p if base is not None and not p.is_absolute() else p

    try:
        if key == "ontology_path" or key == "output_dir":
            return path(value)
        if key == "catalogue_paths":
            if isinstance(value, str):
                value = [v for v in value.split(os.pathsep) if v]
            return tuple(path(v) for v in value)
        if key in ("timeout_seconds", "max_parallel_tools"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if key == "gap_threshold":
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def load_config(config_file: str | Path | None = None, env: Mapping[str, str] | None = None,
                overrides: Mapping[str, Any] | None = None) -> EngineConfig:
    """Layer the config file, then environment, then explicit overrides.

    Relative paths in the file resolve against the file's directory.
    ``None`` values in ``overrides`` are ignored.
    """
    env = os.environ if env is None else env
    values: dict[str, Any] = {}

    path = Path(config_file) if config_file is not None else Path(DEFAULT_CONFIG_FILE)
    if config_file is not None or path.exists():
        try:
            data = tomli.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        section = data.get("aits", data)
        for k, v in section.items():
            if k not in _FILE_KEYS:
                raise ConfigError(f"{path}: unknown key {k!r}")
            values[_FILE_KEYS[k]] = _coerce(_FILE_KEYS[k], v, path.parent)

    for key, var in _ENV.items():
        if env.get(var):
            values[key] = _coerce(key, env[var])

    known = {f.name for f in fields(EngineConfig)}
    for key, v in (overrides or {}).items():
        if v is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown setting {key!r}")
        values[key] = _coerce(key, v)

    return replace(EngineConfig(), **values)
