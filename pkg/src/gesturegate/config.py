"""Flat ``key = value`` config files and dataclass coercion."""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Mapping

from gesturegate.errors import ConfigError


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    try:
        return parse_kv(path.read_text(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def format_kv(values: Mapping[str, Any]) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in values.items())


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce_value(text: str, kind: type, key: str) -> Any:
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot read {text!r} as {kind.__name__}") from None


def from_mapping(cls, values: Mapping[str, Any], strict: bool = True):
    """Build dataclass ``cls`` from string/native values, ignoring None entries."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if value is None:
            continue
        if key not in fields:
            if strict:
                raise ConfigError(f"unknown config key {key!r} for {cls.__name__}")
            continue
        kind = type(fields[key].default) if fields[key].default is not dataclasses.MISSING else str
        kwargs[key] = _coerce_value(value, kind, key) if isinstance(value, str) and kind is not str else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
