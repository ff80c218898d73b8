from dataclasses import replace
from datetime import datetime, timezone

import numpy as np
import pytest

from sensorqc import bench
from sensorqc.bench import (
    PROFILES,
    PerturbationSpec,
    SignMode,
    StationError,
    SyntheticStationParams,
    TestSampleSelector,
    generate_station,
    perturb,
    run_benchmark,
    select_test_samples,
)
from sensorqc.io import LabeledSeries
from sensorqc.model import ModelConfig
from sensorqc.noise import estimate_noise
from sensorqc.pipeline import calibrate, run_qc

T0 = datetime(2021, 6, 1, tzinfo=timezone.utc)


def series(values, start=T0):
    return LabeledSeries("s", "temperature_c", start, np.asarray(values, float))


def test_daily_min_indices():
    x = np.full(48, 10.0)
    x[5], x[29] = 1.0, 2.0
    assert select_test_samples(series(x), TestSampleSelector("daily_min")).tolist() == [5, 29]


def test_daily_max_tie_breaks_earliest():
    x = np.zeros(24)
    x[4] = x[6] = 9.0
    assert select_test_samples(series(x), TestSampleSelector("daily_max")).tolist() == [4]
    y = np.zeros(24)
    y[4] = y[6] = -9.0
    assert select_test_samples(series(y), TestSampleSelector("daily_min")).tolist() == [4]


def test_fixed_hours():
    idx = select_test_samples(series(np.arange(72.0)), TestSampleSelector("fixed_hours", (15, 9)))
    assert idx.tolist() == [9, 15, 33, 39, 57, 63]


def test_gappy_day_skipped():
    x = np.arange(48.0)
    x[24:37] = np.nan
    assert select_test_samples(series(x), TestSampleSelector("daily_min")).tolist() == [0]


def test_local_day_follows_utc_offset():
    # with a +10 h offset, local midnight is 14:00 UTC, so the series starts at local hour 10
    x = np.full(72, 5.0)
    x[13], x[14] = 0.0, 1.0
    idx = select_test_samples(series(x), TestSampleSelector("daily_min"), utc_offset_hours=10)
    assert idx[0] == 13
    assert select_test_samples(series(x), TestSampleSelector("fixed_hours", (0,)), 10).tolist() == [14, 38]


def test_empty_series():
    with pytest.raises(ValueError):
        select_test_samples(LabeledSeries("s", "temperature_c", None, []), TestSampleSelector())


def test_profile_specs():
    t, h, w = PROFILES["temperature"], PROFILES["humidity"], PROFILES["wind"]
    assert (t.perturbation.target_fraction, t.perturbation.magnitude_low, t.perturbation.magnitude_high) == (0.027, 2, 6)
    assert t.perturbation.sign_mode is SignMode.SYMMETRIC and t.selector.mode == "daily_min" and t.stream_count == 2
    assert (w.perturbation.target_fraction, w.perturbation.magnitude_low, w.perturbation.magnitude_high) == (0.10, 5, 14.6)
    assert w.perturbation.sign_mode is SignMode.POSITIVE and w.selector.mode == "daily_max"
    assert (h.perturbation.magnitude_low, h.perturbation.magnitude_high) == (4, 10)
    assert h.selector == TestSampleSelector("fixed_hours", (9, 15)) and h.variable == "dew_point_c"


def test_perturb_changes_exactly_labeled():
    primary, _ = generate_station(SyntheticStationParams(length_days=365, seed=4))
    tests = select_test_samples(primary, TestSampleSelector("daily_min"))
    out = perturb(primary, tests, PerturbationSpec(0.1, 2, 6, seed=1))
    changed = out.values != primary.values
    np.testing.assert_array_equal(changed, out.truth_labels)
    assert set(np.flatnonzero(changed)) <= set(tests)
    diffs = np.abs(out.values - primary.values)[changed]
    assert diffs.min() >= 2 and diffs.max() <= 6
    signs = np.sign((out.values - primary.values)[changed])
    assert (signs > 0).any() and (signs < 0).any()


@pytest.mark.parametrize("fraction", [0.027, 0.05, 0.10])
def test_perturbed_fraction(fraction):
    primary, _ = generate_station(SyntheticStationParams(length_days=365, seed=2))
    tests = select_test_samples(primary, TestSampleSelector("daily_max"))
    out = perturb(primary, tests, PerturbationSpec(fraction, 5, 14.6, SignMode.POSITIVE, seed=3))
    assert abs(out.truth_labels.sum() / tests.size - fraction) <= 0.005
    assert (out.values >= primary.values).all()


def test_perturb_deterministic():
    primary, _ = generate_station(SyntheticStationParams(seed=8))
    tests = select_test_samples(primary, TestSampleSelector("daily_min"))
    a = perturb(primary, tests, PerturbationSpec(0.027, 2, 6, seed=5))
    b = perturb(primary, tests, PerturbationSpec(0.027, 2, 6, seed=5))
    assert np.array_equal(a.values, b.values)


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(0.0, 1, 2)
    with pytest.raises(ValueError):
        PerturbationSpec(0.1, 3, 2)
    with pytest.raises(ValueError):
        SyntheticStationParams(length_days=10)
    with pytest.raises(ValueError):
        SyntheticStationParams(ar_coefficient=1.0)


def test_noiseless_station_hits_floor():
    p, _ = generate_station(SyntheticStationParams(noise_std=0, ar_coefficient=0, diurnal_amplitude=10))
    hour = np.arange(len(p)) % 24
    np.testing.assert_allclose(p.values, 15 + 10 * np.sin(2 * np.pi * hour / 24), atol=1e-12)
    assert estimate_noise(p.values[: 24 * 28]).epsilon_x == 0.7


def test_generator_deterministic():
    params = SyntheticStationParams(diurnal_amplitude=8, noise_std=1.5, ar_coefficient=0.3, seed=11)
    a, b = generate_station(params), generate_station(params)
    assert a[0].values.tobytes() == b[0].values.tobytes()
    assert a[1].values.tobytes() == b[1].values.tobytes()


def test_forecast_bias():
    p, s = generate_station(SyntheticStationParams(nwp_bias=3.0, length_days=365, seed=6))
    assert np.mean(s.values - p.values) == pytest.approx(3.0, abs=0.1)


def test_default_regimes_exercise_both_floor_branches():
    seen = {"x_on": 0, "x_off": 0, "y_on": 0, "y_off": 0}
    for name, prof in PROFILES.items():
        cfg = bench.profile_config(prof)
        for ss in np.random.SeedSequence(0).spawn(40):
            params = prof.draw_params(np.random.default_rng(ss), 60, "s")
            a, b = generate_station(params)
            n = estimate_noise(a.values[:672], b.values[:672] if prof.stream_count == 2 else None, cfg)
            seen["x_on" if n.floor_x_active else "x_off"] += 1
            if prof.stream_count == 2:
                seen["y_on" if n.floor_y_active else "y_off"] += 1
    assert all(v > 0 for v in seen.values()), seen


@pytest.fixture
def custom_profile(monkeypatch):
    def install(name, **changes):
        monkeypatch.setitem(PROFILES, name, replace(PROFILES["wind"], name=name, **changes))
        return name
    return install


def test_no_perturbations_hit_rate_absent(custom_profile):
    name = custom_profile("quiet", perturbation=PerturbationSpec(1e-6, 5, 6))
    res = run_benchmark(2, name, length_days=60)
    assert res.metrics.hit_rate is None
    agg = res.metrics.aggregate
    assert res.metrics.false_positive_rate == agg.fp / (agg.fp + agg.tn)


def test_sparse_gross_outliers_always_hit(custom_profile):
    name = custom_profile("gross", perturbation=PerturbationSpec(0.1, 50, 60, SignMode.POSITIVE))
    res = run_benchmark(3, name, length_days=365)
    assert res.metrics.hit_rate == 1.0


@pytest.mark.parametrize("reject", [False, True])
def test_every_test_sample_gross_outlier(reject):
    params = SyntheticStationParams(noise_std=1.0, ar_coefficient=0.3, length_days=120, seed=21)
    primary, _ = generate_station(params)
    cfg = ModelConfig(test_selector="daily_max", reject_suspects_from_update=reject)
    T = cfg.calibration_length
    cal = calibrate(primary.values[:T], cfg)
    rest = primary.slice(T)
    tests = select_test_samples(rest, TestSampleSelector("daily_max"))
    values = rest.values.copy()
    values[tests] += 50 * cal.noise.epsilon_x
    mask = np.zeros(len(rest), bool)
    mask[tests] = True
    qc = run_qc(cal.state, cal.model, values, cfg, mask)
    hit = qc.flagged[tests].mean()
    if reject:
        assert hit == 1.0
    else:
        # every day's spike is assimilated, so the seasonal state partly learns it
        assert hit >= 0.95


def test_benchmark_deterministic_and_parallel_safe():
    a = run_benchmark(3, "wind", seed=4, length_days=90)
    b = run_benchmark(3, "wind", seed=4, length_days=90, jobs=2)
    assert a.metrics.to_dict() == b.metrics.to_dict()
    assert run_benchmark(3, "wind", seed=5, length_days=90).metrics.to_dict() != a.metrics.to_dict()


def test_humidity_verdicts_in_rh():
    res = run_benchmark(2, "humidity", length_days=60, keep_verdicts=True)
    assert res.verdict_variable == "rh_percent"
    vs = [v for sid in res.verdicts for v in res.verdicts[sid]]
    assert vs and all(0 <= v.observed <= 100 and 0 <= v.predicted_mean <= 100 for v in vs)
    assert {v.sample_time.hour for v in vs} == {9, 15}


def test_station_errors_name_the_station():
    with pytest.raises(StationError, match="wind-000"):
        run_benchmark(1, "wind", ModelConfig(calibration_days=100), length_days=60)


def test_benchmark_argument_checks():
    with pytest.raises(ValueError):
        run_benchmark(1, "snow")
    with pytest.raises(ValueError):
        run_benchmark(0, "wind")
