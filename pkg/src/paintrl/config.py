"""Plain-text key = value configuration files.

One key per line, '#' starts a comment, blank lines are ignored. Keys map
onto TrainConfig fields plus the environment fields (l_max, w_max, w_eps,
beta, h_o, w_o, pad_value); unknown keys are hard errors so hyperparameter
typos cannot pass silently.
"""

import dataclasses

from .env import EnvConfig
from .trainer import TrainConfig

__all__ = ["ConfigError", "default_config_text", "format_config", "load_config", "parse_config"]


class ConfigError(Exception):
    """Raised for malformed or unknown configuration keys/values."""


_TRAIN_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig) if f.name != "env"}
_ENV_FIELDS = {f.name: f.type for f in dataclasses.fields(EnvConfig)}

_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def _convert(key: str, value: str, typ):
    if isinstance(typ, str):  # dataclass may record annotations as strings
        typ = {"float": float, "int": int, "str": str, "bool": bool}[typ]
    base = typ
    if base is bool:
        try:
            return _BOOL_WORDS[value.lower()]
        except KeyError:
            raise ConfigError(f"key {key!r}: expected a boolean, got {value!r}") from None
    if base is str:
        return value
    try:
        return base(value)
    except ValueError:
        raise ConfigError(
            f"key {key!r}: expected {base.__name__}, got {value!r}"
        ) from None


def parse_config(text: str) -> TrainConfig:
    """Build a TrainConfig (with nested EnvConfig) from key = value text."""
    train_kwargs, env_kwargs = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _TRAIN_FIELDS:
            if key in train_kwargs:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            train_kwargs[key] = _convert(key, value, _TRAIN_FIELDS[key])
        elif key in _ENV_FIELDS:
            if key in env_kwargs:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            env_kwargs[key] = _convert(key, value, _ENV_FIELDS[key])
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        return TrainConfig(env=EnvConfig(**env_kwargs), **train_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: TrainConfig) -> str:
    """Serialize a config back to the key = value format (round trips)."""
    lines = ["# training"]
    for name in _TRAIN_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name)}")
    lines.append("")
    lines.append("# environment")
    for name in _ENV_FIELDS:
        lines.append(f"{name} = {getattr(cfg.env, name)}")
    return "\n".join(lines) + "\n"


def default_config_text() -> str:
    return format_config(TrainConfig())
