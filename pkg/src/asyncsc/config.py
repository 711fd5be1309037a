"""Flat YAML scenario files."""

from __future__ import annotations

import dataclasses

import yaml

from .errors import ConfigurationError
from .experiments.scenario import Scenario

_TYPES = {f.name: f.type for f in dataclasses.fields(Scenario)}


def _coerce(key: str, value):
    kind = _TYPES[key]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{key}: expected an integer, got {value!r}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{key}: expected a number, got {value!r}")
        value = float(value)
    elif kind == "str" and not isinstance(value, str):
        raise ConfigurationError(f"{key}: expected a string, got {value!r}")
    return value


def parse_config(text: str) -> Scenario:
    """Scenario from YAML text; unspecified keys keep their defaults."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigurationError(f"config parse error{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping of scenario fields")
    unknown = sorted(set(data) - set(_TYPES))
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(map(str, unknown))}")
    return Scenario(**{k: _coerce(k, v) for k, v in data.items()})


def load_config(path) -> Scenario:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(s: Scenario) -> str:
    return yaml.safe_dump(s.to_dict(), sort_keys=True)
