"""Observation-noise estimation by Butterworth high-pass filtering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .model import ModelConfig, NoiseEstimate

MAX_GAP_FRACTION = 0.2
HIGHPASS_ORDER = 3
CUTOFF_PERIODS = 5.0


@dataclass(frozen=True)
class IIRFilterSpec:
    """Transfer function ``b(z)/a(z)`` with ``a[0] == 1``."""

    order: int
    cutoff_cycles_per_hour: float
    sample_interval_hours: float
    numerator_coeffs: np.ndarray
    denominator_coeffs: np.ndarray

    @property
    def poles(self) -> np.ndarray:
        return np.roots(self.denominator_coeffs)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles) < 1.0))

    def frequency_response(self, freqs_cycles_per_hour) -> np.ndarray:
        """Complex single-pass response at the given frequencies."""
        w = 2 * np.pi * np.asarray(freqs_cycles_per_hour, dtype=float) * self.sample_interval_hours
        z_inv = np.exp(-1j * w)
        # coefficients are in descending powers of z, i.e. ascending powers of z^-1
        num = np.polyval(self.numerator_coeffs[::-1], z_inv)
        den = np.polyval(self.denominator_coeffs[::-1], z_inv)
        return num / den

    def gain_db(self, freqs_cycles_per_hour) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.frequency_response(freqs_cycles_per_hour)))


def design_highpass(
    order: int, cutoff_cycles_per_hour: float, sample_interval_hours: float = 1.0
) -> IIRFilterSpec:
    """Digital Butterworth high-pass via the pre-warped bilinear transform.

    The analog prototype has unit-circle poles in the left half plane; it is
    mapped to a high-pass at the pre-warped cutoff and then discretised, so
    the digital magnitude at ``cutoff_cycles_per_hour`` is exactly -3 dB.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    fs = 1.0 / sample_interval_hours
    nyquist = 0.5 * fs
    if not 0.0 < cutoff_cycles_per_hour < nyquist:
        raise ValueError(
            f"cutoff {cutoff_cycles_per_hour} cycles/h must lie strictly between 0 "
            f"and the Nyquist frequency {nyquist}"
        )

    k = np.arange(1, order + 1)
    proto_poles = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))

    warped = 2 * fs * np.tan(np.pi * cutoff_cycles_per_hour / fs)
    hp_poles = warped / proto_poles
    hp_zeros = np.zeros(order)
    hp_gain = np.real(1.0 / np.prod(-proto_poles))

    fs2 = 2 * fs
    d_zeros = (fs2 + hp_zeros) / (fs2 - hp_zeros)
    d_poles = (fs2 + hp_poles) / (fs2 - hp_poles)
    d_gain = hp_gain * np.real(np.prod(fs2 - hp_zeros) / np.prod(fs2 - hp_poles))

    b = d_gain * np.real(np.poly(d_zeros))
    a = np.real(np.poly(d_poles))
    b, a = b / a[0], a / a[0]
    return IIRFilterSpec(
        order=order,
        cutoff_cycles_per_hour=float(cutoff_cycles_per_hour),
        sample_interval_hours=float(sample_interval_hours),
        numerator_coeffs=b,
        denominator_coeffs=a,
    )


def diurnal_highpass(period_tau: int) -> IIRFilterSpec:
    """Third-order high-pass with cutoff ``5 / period_tau`` cycles per hour."""
    return design_highpass(HIGHPASS_ORDER, CUTOFF_PERIODS / period_tau, 1.0)


def apply_filter(filt: IIRFilterSpec, series) -> np.ndarray:
    """Zero-phase forward-backward filtering with odd-reflection edge padding."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if x.size < 4 * filt.order:
        raise ValueError(f"series of length {x.size} is shorter than {4 * filt.order} samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains gaps; interpolate before filtering")
    return signal.filtfilt(
        filt.numerator_coeffs,
        filt.denominator_coeffs,
        x,
        padtype="odd",
        padlen=3 * filt.order,
    )


def interpolate_gaps(values) -> np.ndarray:
    """Fill NaN gaps linearly; leading/trailing gaps take the nearest value."""
    x = np.asarray(values, dtype=float).copy()
    missing = ~np.isfinite(x)
    if missing.all():
        raise ValueError("series has no observed samples")
    if missing.any():
        idx = np.arange(x.size)
        x[missing] = np.interp(idx[missing], idx[~missing], x[~missing])
    return x


def gap_fraction(values) -> float:
    x = np.asarray(values, dtype=float)
    return float(np.mean(~np.isfinite(x))) if x.size else 1.0


def highpass_std(series, period_tau: int) -> float:
    """Standard deviation of the high-passed series over its observed samples."""
    x = np.asarray(series, dtype=float)
    observed = np.isfinite(x)
    filtered = apply_filter(diurnal_highpass(period_tau), interpolate_gaps(x))
    return float(np.std(filtered[observed]))


def _check_window(series, period_tau: int, label: str) -> None:
    n = np.asarray(series).size
    if n < 2 * period_tau:
        raise ValueError(
            f"{label} calibration window has {n} samples; at least 2*tau = {2 * period_tau} required"
        )
    frac = gap_fraction(series)
    if frac > MAX_GAP_FRACTION:
        raise ValueError(
            f"{label} calibration window is {frac:.1%} gaps (limit {MAX_GAP_FRACTION:.0%})"
        )


def estimate_noise(primary_series, secondary_series=None, config: ModelConfig | None = None) -> NoiseEstimate:
    config = config or ModelConfig(stream_count=1 if secondary_series is None else 2)
    tau = config.period_tau
    _check_window(primary_series, tau, "primary")
    raw_x = highpass_std(primary_series, tau)
    raw_y = None
    if secondary_series is not None:
        _check_window(secondary_series, tau, "secondary")
        raw_y = highpass_std(secondary_series, tau)
    return floor_noise(raw_x, raw_y, config)


def floor_noise(raw_x: float, raw_y: float | None, config: ModelConfig) -> NoiseEstimate:
    """Apply the configured floors to already-measured stream noise levels."""
    eps_x = max(raw_x, config.tpws_noise_floor)
    if raw_y is None:
        return NoiseEstimate(epsilon_x=eps_x, raw_x=raw_x)
    eps_y = max(raw_y, config.nwp_noise_multiplier * eps_x)
    return NoiseEstimate(epsilon_x=eps_x, epsilon_y=eps_y, raw_x=raw_x, raw_y=raw_y)
