"""End-to-end quality control: calibrate on a window, then filter and test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationWindow, init_state
from .detection import p_value_two_sided
from .kalman import FilterState, filter_observations
from .model import ModelConfig, NoiseEstimate, StateSpaceModel, assemble_model
from .noise import estimate_noise


@dataclass(frozen=True, eq=False)
class Calibration:
    noise: NoiseEstimate
    model: StateSpaceModel
    state: FilterState


def _streams(values, config: ModelConfig) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] < config.stream_count:
        raise ValueError(f"model needs {config.stream_count} stream(s), got {arr.shape[1]}")
    return arr[:, : config.stream_count]


def calibrate(window_values, config: ModelConfig, t0: int = 0, start_hour_of_day: int = 0) -> Calibration:
    """Estimate noise, build the model and bring the state to the window's end.

    ``window_values`` is ``(T,)`` or ``(T, V)`` with NaN gaps and ``t0`` is
    the timestep index of its first row. The returned state sits at
    ``t0 + T - 1``, ready for the next sample.
    """
    v = _streams(window_values, config)
    tau = config.period_tau
    T = v.shape[0]
    CalibrationWindow(v[:, 0], start_hour_of_day).validate(tau)
    noise = estimate_noise(v[:, 0], v[:, 1] if config.stream_count == 2 else None, config)
    model = assemble_model(config, noise)
    state = init_state(CalibrationWindow(v[:, 0], start_hour_of_day), model, config)
    tail = filter_observations(state, model, v[state.t + 1:], joseph=config.joseph_form)
    end = tail.final_state
    return Calibration(noise, model, FilterState(end.f, end.F, t0 + T - 1))


@dataclass(frozen=True, eq=False)
class QCResult:
    """Per-timestep one-step predictions and test outcomes.

    ``p_values`` and ``flagged`` are NaN/False outside the tested samples.
    """

    observed: np.ndarray
    predicted_mean: np.ndarray
    predicted_std: np.ndarray
    p_values: np.ndarray
    tested: np.ndarray
    flagged: np.ndarray
    final_state: FilterState


def run_qc(state: FilterState, model: StateSpaceModel, values, config: ModelConfig, test_mask=None) -> QCResult:
    """Filter ``values`` after ``state`` and test the primary readings in ``test_mask``.

    Each tested reading is judged against the prediction made before it is
    assimilated (given the same-hour forecast reading when
    ``condition_on_secondary`` is set). With ``reject_suspects_from_update`` a flagged reading is
    then left out of the update.
    """
    v = _streams(values, config)
    n = v.shape[0]
    tested = np.ones(n, bool) if test_mask is None else np.asarray(test_mask, bool)
    tested = tested & np.isfinite(v[:, 0])
    run = filter_observations(
        state,
        model,
        v,
        gate_mask=tested if config.reject_suspects_from_update else None,
        gate_threshold=config.p_threshold if config.reject_suspects_from_update else None,
        joseph=config.joseph_form,
        condition_on_secondary=config.condition_on_secondary,
    )
    mu, var = run.mu_test, run.var_test
    p = np.full(n, np.nan)
    if tested.any():
        p[tested] = p_value_two_sided(v[tested, 0], mu[tested], var[tested])
    flagged = tested & (p < config.p_threshold)
    return QCResult(
        observed=v[:, 0].copy(),
        predicted_mean=mu,
        predicted_std=np.sqrt(var),
        p_values=p,
        tested=tested,
        flagged=flagged,
        final_state=run.final_state,
    )
