"""Plain-text ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Recognised keys are the
:class:`~sensorqc.model.ModelConfig` fields plus the ``bench_*`` keys that
describe a benchmark profile::

    # station 0412
    period_tau = 24
    stream_count = 2
    p_threshold = 0.1
    test_selector = daily_min
    bench_profile = temperature
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .model import ModelConfig

ENV_VAR = "SENSORQC_CONFIG"

_INT_KEYS = {"period_tau", "stream_count", "calibration_days"}
_FLOAT_KEYS = {
    "process_noise_scale",
    "prior_cov_scale",
    "p_threshold",
    "tpws_noise_floor",
    "nwp_noise_multiplier",
    "utc_offset_hours",
}
_BOOL_KEYS = {
    "seasonal_demean",
    "reject_suspects_from_update",
    "condition_on_secondary",
    "joseph_form",
}
BENCH_KEYS = {"bench_profile", "bench_stations", "bench_seed", "bench_length_days"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigFile:
    model: dict
    bench: dict


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_value(key: str, text: str):
    """Convert the raw text of ``key`` to its typed value."""
    if key in _INT_KEYS or key in ("bench_stations", "bench_seed", "bench_length_days"):
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _BOOL_KEYS:
        return _parse_bool(text)
    if key == "test_hours":
        return tuple(int(h) for h in text.replace(",", " ").split())
    if key in ("test_selector", "bench_profile", "process_noise_structure"):
        return text.strip()
    raise KeyError(key)


def read_config_file(path) -> ConfigFile:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    model, bench = {}, {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            typed = parse_value(key, value)
        except KeyError:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}") from None
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        (bench if key in BENCH_KEYS else model)[key] = typed
    return ConfigFile(model=model, bench=bench)


def load_config(path=None, **overrides) -> ModelConfig:
    """Build a :class:`ModelConfig` with precedence overrides > file > defaults.

    ``path`` falls back to the ``SENSORQC_CONFIG`` environment variable.
    Overrides set to ``None`` are ignored.
    """
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    values = read_config_file(path).model if path is not None else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ModelConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def format_config(config: ModelConfig) -> str:
    """Serialise ``config`` in the format accepted by :func:`read_config_file`."""
    out = []
    for name in ModelConfig.field_names():
        value = getattr(config, name)
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        out.append(f"{name} = {value}")
    return "\n".join(out) + "\n"
