import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal

from sensorqc.model import ModelConfig
from sensorqc.noise import (
    apply_filter,
    design_highpass,
    diurnal_highpass,
    estimate_noise,
    floor_noise,
    highpass_std,
    interpolate_gaps,
)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("tau", [11, 12, 24, 48, 168])
def test_coefficients_match_scipy(order, tau):
    fc = 5.0 / tau
    filt = design_highpass(order, fc)
    b, a = signal.butter(order, fc / 0.5, btype="highpass")
    np.testing.assert_allclose(filt.numerator_coeffs, b, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(filt.denominator_coeffs, a, rtol=1e-10, atol=1e-13)
    assert filt.denominator_coeffs[0] == 1.0


def test_sample_interval_scales_frequency():
    a = design_highpass(3, 0.1, 1.0)
    b = design_highpass(3, 0.05, 2.0)
    np.testing.assert_allclose(a.numerator_coeffs, b.numerator_coeffs, rtol=1e-12)
    np.testing.assert_allclose(a.denominator_coeffs, b.denominator_coeffs, rtol=1e-12)


def test_gain_at_cutoff_and_dc():
    filt = design_highpass(3, 5 / 24, 1.0)
    g = filt.gain_db([5 / 24])[0]
    assert -3.1 <= g <= -2.9
    assert filt.gain_db([0.0])[0] < -100
    assert abs(filt.gain_db([0.4999])[0]) < 0.01


def test_stopband_slope_is_18_db_per_octave():
    filt = diurnal_highpass(24)
    fc = filt.cutoff_cycles_per_hour
    slope = filt.gain_db([fc / 4])[0] - filt.gain_db([fc / 8])[0]
    assert slope == pytest.approx(18.06, abs=0.5)


def test_frequency_response_matches_freqz():
    filt = diurnal_highpass(24)
    f = np.linspace(0.01, 0.49, 25)
    _, h = signal.freqz(filt.numerator_coeffs, filt.denominator_coeffs, worN=2 * np.pi * f)
    np.testing.assert_allclose(filt.frequency_response(f), h, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("cutoff", [0.0, -0.1, 0.5, 0.7])
def test_design_rejects_bad_cutoff(cutoff):
    with pytest.raises(ValueError):
        design_highpass(3, cutoff, 1.0)


def test_design_rejects_bad_order():
    with pytest.raises(ValueError):
        design_highpass(0, 0.1)


def test_constant_series_is_removed():
    out = apply_filter(diurnal_highpass(24), np.full(96, 5.0))
    assert np.abs(out).max() < 1e-8
    assert out.shape == (96,)


def test_diurnal_sinusoid_is_suppressed():
    t = np.arange(24 * 28)
    out = apply_filter(diurnal_highpass(24), np.sin(2 * np.pi * t / 24))
    assert np.sqrt(np.mean(out ** 2)) < 0.02


def test_white_noise_std_band():
    stds = [np.std(apply_filter(diurnal_highpass(24), np.random.default_rng(s).normal(size=10_000)))
            for s in range(10)]
    assert 0.55 <= np.mean(stds) <= 0.85
    assert all(0.55 <= s <= 0.85 for s in stds)


def test_matches_scipy_filtfilt():
    filt = diurnal_highpass(24)
    x = np.random.default_rng(1).normal(size=500)
    ref = signal.filtfilt(signal.butter(3, 5 / 12, "highpass")[0], signal.butter(3, 5 / 12, "highpass")[1],
                          x, padtype="odd", padlen=9)
    np.testing.assert_allclose(apply_filter(filt, x), ref, atol=1e-12)


def test_apply_rejects_short_or_gappy():
    filt = diurnal_highpass(24)
    with pytest.raises(ValueError, match="short"):
        apply_filter(filt, np.ones(11))
    x = np.ones(50)
    x[3] = np.nan
    with pytest.raises(ValueError):
        apply_filter(filt, x)


@given(st.integers(0, 2 ** 32 - 1), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=25, deadline=None)
def test_filter_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, 200))
    filt = diurnal_highpass(24)
    lhs = apply_filter(filt, a * x + b * y)
    rhs = a * apply_filter(filt, x) + b * apply_filter(filt, y)
    assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(rhs).max())


def test_zero_phase():
    t = np.arange(2000)
    x = np.sin(2 * np.pi * 0.3 * t)
    y = apply_filter(diurnal_highpass(24), x)
    core = slice(200, 1800)
    lags = np.arange(-5, 6)
    xc = [np.dot(x[core], np.roll(y, -k)[core]) for k in lags]
    assert lags[int(np.argmax(xc))] == 0


def test_interpolate_gaps():
    np.testing.assert_allclose(interpolate_gaps([np.nan, 1.0, np.nan, 3.0, np.nan]), [1, 1, 2, 3, 3])
    with pytest.raises(ValueError):
        interpolate_gaps([np.nan, np.nan])


def test_floor_examples():
    cfg = ModelConfig(stream_count=2)
    assert floor_noise(0.4, None, ModelConfig()).epsilon_x == 0.7
    n = floor_noise(1.0, 0.9, cfg)
    assert (n.epsilon_x, n.epsilon_y) == (1.0, 1.5)
    n = floor_noise(2.0, 4.0, cfg)
    assert (n.epsilon_x, n.epsilon_y) == (2.0, 4.0)
    assert not n.floor_x_active and not n.floor_y_active


def test_estimate_noise_floors_smooth_input():
    t = np.arange(24 * 28)
    n = estimate_noise(10 * np.sin(2 * np.pi * t / 24))
    assert n.epsilon_x == 0.7 and n.floor_x_active


def test_estimate_noise_window_checks():
    with pytest.raises(ValueError, match="2\\*tau"):
        estimate_noise(np.ones(30))
    x = np.random.default_rng(0).normal(size=96)
    x[:25] = np.nan
    with pytest.raises(ValueError, match="gaps"):
        estimate_noise(x)


def test_gaps_are_interpolated_not_counted():
    rng = np.random.default_rng(5)
    x = rng.normal(0, 3, size=24 * 28)
    x[::10] = np.nan
    filt = apply_filter(diurnal_highpass(24), interpolate_gaps(x))
    assert highpass_std(x, 24) == pytest.approx(np.std(filt[np.isfinite(x)]), rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.floats(-1e3, 1e3))
@settings(max_examples=25, deadline=None)
def test_offset_invariance(seed, c):
    x = np.random.default_rng(seed).normal(0, 2, size=24 * 7)
    assert abs(highpass_std(x + c, 24) - highpass_std(x, 24)) < 1e-8


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.5, 20))
@settings(max_examples=25, deadline=None)
def test_scaling_above_floor(seed, k):
    x = np.random.default_rng(seed).normal(0, 3, size=24 * 14)
    base = estimate_noise(x)
    scaled = estimate_noise(k * x)
    if base.raw_x > 0.7 and scaled.raw_x > 0.7:
        assert scaled.epsilon_x == pytest.approx(k * base.epsilon_x, rel=1e-9)


@pytest.mark.parametrize("tau", [12, 24, 48])
def test_stable_for_periods(tau):
    filt = diurnal_highpass(tau)
    assert filt.is_stable()
    assert np.abs(filt.poles).max() < 1
