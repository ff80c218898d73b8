"""Initial filter state from a calibration window."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kalman import FilterState
from .model import ModelConfig, StateSpaceModel
from .noise import interpolate_gaps


@dataclass(frozen=True, eq=False)
class CalibrationWindow:
    """``T`` hourly samples; ``start_hour_of_day`` is the local hour of sample 0."""

    samples: np.ndarray
    start_hour_of_day: int = 0

    def __post_init__(self):
        x = np.array(self.samples, dtype=float, copy=True)
        if x.ndim != 1:
            raise ValueError("calibration samples must be one-dimensional")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if not 0 <= self.start_hour_of_day < 24:
            raise ValueError(f"start_hour_of_day must be in 0..23, got {self.start_hour_of_day}")

    @property
    def T(self) -> int:
        return self.samples.size

    def validate(self, period_tau: int) -> None:
        if self.T < 2 * period_tau:
            raise ValueError(
                f"calibration window has T={self.T} samples; need T >= 2*tau = {2 * period_tau}"
            )
        if self.T % period_tau:
            raise ValueError(
                f"calibration length T={self.T} is not divisible by tau={period_tau}"
            )


def anchor_index(T: int, period_tau: int) -> int:
    """Window index of the sample the initial state refers to.

    The initial state describes the last window sample at slot 1 (index
    ``T - tau + 1``); the samples after it are filtered normally.
    """
    return T - period_tau + 1


def slot_means(samples, period_tau: int) -> np.ndarray:
    """Mean of the samples at each position ``0..tau-1`` within the period."""
    x = interpolate_gaps(samples)
    return x.reshape(-1, period_tau).mean(axis=0)


def init_state(window: CalibrationWindow, model: StateSpaceModel, config: ModelConfig) -> FilterState:
    """Level and seasonal effects estimated from slot means; ``F0 = 5 sigma_h``.

    The seasonal states are ordered newest first as of the anchor sample
    (slot 1), so entries 1, 2, 3, ... hold slots 1, 0, tau-1, ... . The
    returned state's ``t`` is the anchor's index within the window.
    """
    tau = config.period_tau
    if model.H != tau:
        raise ValueError(f"model has H={model.H} but config period_tau={tau}")
    window.validate(tau)
    means = slot_means(window.samples, tau)
    level = means.mean()

    f0 = np.empty(tau)
    f0[0] = level
    slots = (2 - np.arange(1, tau)) % tau
    f0[1:] = means[slots]
    if config.seasonal_demean:
        f0[1:] -= level
    F0 = config.prior_cov_scale * model.sigma_h
    return FilterState(f0, F0, t=anchor_index(window.T, tau))
