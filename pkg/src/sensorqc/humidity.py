"""Dew point <-> relative humidity conversion.

RH = 100 exp(1.8096 + 17.2694 Td/(237.3 + Td)) / exp(1.8096 + 17.2694 Ta/(237.3 + Ta))
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_OFFSET = 1.8096
_SLOPE = 17.2694
_POLE = 237.3


def _check_pole(*temps) -> None:
    for t in temps:
        if np.any(np.asarray(t, dtype=float) <= -_POLE):
            raise ValueError(f"temperatures must exceed {-_POLE} degC")


def _log_vapour(t):
    return _OFFSET + _SLOPE * t / (_POLE + t)


def dew_point_to_rh_raw(t_d, t_a):
    """Unclamped RH in percent; exceeds 100 when ``t_d > t_a``."""
    _check_pole(t_d, t_a)
    t_d = np.asarray(t_d, dtype=float)
    t_a = np.asarray(t_a, dtype=float)
    # a single exp of the difference keeps t_d == t_a at exactly 100
    rh = 100.0 * np.exp(_log_vapour(t_d) - _log_vapour(t_a))
    return float(rh) if rh.ndim == 0 else rh


def dew_point_to_rh(t_d, t_a):
    """RH in percent, clamped to [0, 100]."""
    return np.clip(dew_point_to_rh_raw(t_d, t_a), 0.0, 100.0)[()]


def rh_to_dew_point(rh, t_a):
    """Closed-form inverse of :func:`dew_point_to_rh_raw` for ``0 < rh``."""
    rh = np.asarray(rh, dtype=float)
    if np.any(~(rh > 0)):
        raise ValueError("relative humidity must be positive")
    _check_pole(t_a)
    g = np.log(rh / 100.0) + _SLOPE * np.asarray(t_a, dtype=float) / (_POLE + np.asarray(t_a, dtype=float))
    t_d = _POLE * g / (_SLOPE - g)
    return float(t_d) if t_d.ndim == 0 else t_d


@dataclass(frozen=True)
class HumidityPair:
    dew_point_c: float
    dry_bulb_c: float
    rh_percent: float
    clamped: bool = False

    @classmethod
    def from_temperatures(cls, dew_point_c: float, dry_bulb_c: float) -> "HumidityPair":
        raw = dew_point_to_rh_raw(dew_point_c, dry_bulb_c)
        rh = min(max(raw, 0.0), 100.0)
        return cls(float(dew_point_c), float(dry_bulb_c), rh, clamped=rh != raw)
