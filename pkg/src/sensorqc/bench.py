"""Synthetic stations, test-sample selection, perturbation and benchmark runs.

Each profile mirrors one evaluation setting:

* ``temperature``: daily minima, fused with a forecast stream, 2.7 % of
  test samples shifted by +/-U(2, 6) degC;
* ``humidity``: 09:00 and 15:00 readings, filtered as dew point with
  +/-U(4, 10) degC shifts and reported as relative humidity;
* ``wind``: daily maximum gusts, 10 % raised by U(5, 14.6) m/s.
"""
from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .detection import Label, Verdict
from .humidity import dew_point_to_rh
from .io import HOUR, LabeledSeries
from .metrics import ConfusionCounts, MetricsReport
from .model import ModelConfig
from .pipeline import calibrate, run_qc

DEFAULT_START = datetime(2017, 1, 1, tzinfo=timezone.utc)
MAX_DAY_GAP_FRACTION = 0.5


class SignMode(str, enum.Enum):
    SYMMETRIC = "symmetric_two_sided"
    POSITIVE = "positive_only"


@dataclass(frozen=True)
class PerturbationSpec:
    target_fraction: float
    magnitude_low: float
    magnitude_high: float
    sign_mode: SignMode = SignMode.SYMMETRIC
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.target_fraction < 1:
            raise ValueError("target_fraction must lie in (0, 1)")
        if not 0 < self.magnitude_low < self.magnitude_high:
            raise ValueError("need 0 < magnitude_low < magnitude_high")
        object.__setattr__(self, "sign_mode", SignMode(self.sign_mode))


@dataclass(frozen=True)
class TestSampleSelector:
    mode: str = "daily_min"
    hours: tuple[int, ...] = ()

    __test__ = False

    def __post_init__(self):
        if self.mode not in ("all", "daily_min", "daily_max", "fixed_hours"):
            raise ValueError(f"unknown selector mode {self.mode!r}")
        if self.mode == "fixed_hours" and not self.hours:
            raise ValueError("fixed_hours selector needs at least one hour")


@dataclass(frozen=True)
class SyntheticStationParams:
    level: float = 15.0
    diurnal_amplitude: float = 8.0
    noise_std: float = 1.0
    ar_coefficient: float = 0.5
    nwp_bias: float = 0.0
    nwp_noise_std: float = 1.0
    length_days: int = 730
    seed: int = 0
    station_id: str = "synthetic"
    variable: str = "temperature_c"
    start: datetime = DEFAULT_START

    def __post_init__(self):
        if self.noise_std < 0 or self.nwp_noise_std < 0 or self.diurnal_amplitude < 0:
            raise ValueError("standard deviations and amplitude must be non-negative")
        if not 0 <= self.ar_coefficient < 1:
            raise ValueError("ar_coefficient must lie in [0, 1)")
        if self.length_days < 30:
            raise ValueError("length_days must be >= 30")


def selector_from_config(config: ModelConfig) -> TestSampleSelector:
    return TestSampleSelector(config.test_selector, tuple(config.test_hours))


def select_test_samples(series: LabeledSeries, selector: TestSampleSelector,
                        utc_offset_hours: float = 0.0) -> np.ndarray:
    """Indices of the test samples, grouped by local calendar day.

    Extremum modes pick one sample per day (earliest on ties); days with
    more than half of their 24 hours missing contribute nothing.
    """
    n = len(series)
    if n == 0:
        raise ValueError("cannot select test samples from an empty series")
    values = series.values
    if selector.mode == "all":
        return np.flatnonzero(np.isfinite(values))
    offset = timedelta(hours=utc_offset_hours)
    local0 = series.start + offset
    # position of index 0 within its local day
    lead = local0.hour
    day = (np.arange(n) + lead) // 24
    hour = (np.arange(n) + lead) % 24
    out = []
    for d in range(day[-1] + 1):
        idx = np.flatnonzero(day == d)
        vals = values[idx]
        missing = 24 - np.count_nonzero(np.isfinite(vals))
        if missing > MAX_DAY_GAP_FRACTION * 24:
            continue
        if selector.mode == "fixed_hours":
            for h in sorted(selector.hours):
                hit = idx[(hour[idx] == h) & np.isfinite(vals)]
                out.extend(hit.tolist())
        else:
            pick = np.nanargmin(vals) if selector.mode == "daily_min" else np.nanargmax(vals)
            out.append(idx[pick])
    return np.asarray(out, dtype=int)


def perturb(series: LabeledSeries, test_indices, spec: PerturbationSpec) -> LabeledSeries:
    """Add uniform offsets to a random ``target_fraction`` of the test samples."""
    test_indices = np.asarray(test_indices, dtype=int)
    rng = np.random.default_rng(spec.seed)
    count = int(round(spec.target_fraction * test_indices.size))
    chosen = np.sort(rng.choice(test_indices, size=count, replace=False))
    offsets = rng.uniform(spec.magnitude_low, spec.magnitude_high, size=count)
    if spec.sign_mode is SignMode.SYMMETRIC:
        offsets = np.where(rng.random(count) < 0.5, -offsets, offsets)
    values = series.values.copy()
    values[chosen] += offsets
    labels = np.zeros(len(series), dtype=bool) if series.truth_labels is None else series.truth_labels.copy()
    labels[chosen] = True
    return series.with_values(values, labels)


def _diurnal(params: SyntheticStationParams, n: int) -> np.ndarray:
    hour = (np.arange(n) + params.start.hour) % 24
    return params.level + params.diurnal_amplitude * np.sin(2 * np.pi * hour / 24)


def generate_station(params: SyntheticStationParams) -> tuple[LabeledSeries, LabeledSeries]:
    """Station stream (diurnal cycle + AR(1) noise) and a biased, noisy forecast stream."""
    n = params.length_days * 24
    rng = np.random.default_rng(params.seed)
    clean = _diurnal(params, n)
    phi = params.ar_coefficient
    innov = rng.normal(0.0, params.noise_std, size=n)
    ar = np.empty(n)
    ar[0] = innov[0] / np.sqrt(1 - phi ** 2)
    for t in range(1, n):
        ar[t] = phi * ar[t - 1] + innov[t]
    nwp = clean + params.nwp_bias + rng.normal(0.0, params.nwp_noise_std, size=n)
    primary = LabeledSeries(params.station_id, params.variable, params.start, clean + ar)
    secondary = LabeledSeries(params.station_id, params.variable, params.start, nwp)
    return primary, secondary


@dataclass(frozen=True)
class Profile:
    name: str
    variable: str
    stream_count: int
    selector: TestSampleSelector
    perturbation: PerturbationSpec
    param_ranges: dict = field(default_factory=dict)

    def draw_params(self, rng: np.random.Generator, length_days: int, station_id: str) -> SyntheticStationParams:
        drawn = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in sorted(self.param_ranges.items())}
        return SyntheticStationParams(
            length_days=length_days,
            seed=int(rng.integers(2 ** 31)),
            station_id=station_id,
            variable=self.variable,
            **drawn,
        )


PROFILES = {
    "temperature": Profile(
        name="temperature",
        variable="temperature_c",
        stream_count=2,
        selector=TestSampleSelector("daily_min"),
        perturbation=PerturbationSpec(0.027, 2.0, 6.0, SignMode.SYMMETRIC),
        param_ranges={
            "level": (5.0, 25.0),
            "diurnal_amplitude": (3.0, 9.0),
            "noise_std": (0.2, 0.8),
            "ar_coefficient": (0.5, 0.9),
            "nwp_bias": (-0.5, 0.5),
            "nwp_noise_std": (0.3, 1.6),
        },
    ),
    "humidity": Profile(
        name="humidity",
        variable="dew_point_c",
        stream_count=1,
        selector=TestSampleSelector("fixed_hours", (9, 15)),
        perturbation=PerturbationSpec(0.05, 4.0, 10.0, SignMode.SYMMETRIC),
        param_ranges={
            "level": (0.0, 15.0),
            "diurnal_amplitude": (0.5, 3.0),
            "noise_std": (0.3, 1.6),
            "ar_coefficient": (0.5, 0.9),
            "nwp_bias": (0.0, 0.0),
            "nwp_noise_std": (0.0, 0.0),
        },
    ),
    "wind": Profile(
        name="wind",
        variable="wind_gust_ms",
        stream_count=1,
        selector=TestSampleSelector("daily_max"),
        perturbation=PerturbationSpec(0.10, 5.0, 14.6, SignMode.POSITIVE),
        param_ranges={
            "level": (6.0, 14.0),
            "diurnal_amplitude": (2.0, 6.0),
            "noise_std": (0.4, 1.6),
            "ar_coefficient": (0.2, 0.6),
            "nwp_bias": (0.0, 0.0),
            "nwp_noise_std": (0.0, 0.0),
        },
    ),
}


def profile_config(profile: str | Profile, base: ModelConfig | None = None) -> ModelConfig:
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    base = base or ModelConfig()
    return replace(
        base,
        stream_count=prof.stream_count,
        test_selector=prof.selector.mode,
        test_hours=prof.selector.hours or base.test_hours,
    )


def dry_bulb_for(dew_point: LabeledSeries, seed: int) -> np.ndarray:
    """Dry-bulb temperature above a dew-point series: a diurnal dewpoint depression."""
    rng = np.random.default_rng(seed)
    n = len(dew_point)
    hour = (np.arange(n) + dew_point.start.hour) % 24
    depression = 7.0 + 4.0 * np.sin(2 * np.pi * (hour - 9) / 24) + rng.normal(0.0, 0.5, size=n)
    return dew_point.values + np.maximum(depression, 0.5)


@dataclass(frozen=True, eq=False)
class StationResult:
    station_id: str
    counts: ConfusionCounts
    verdicts: tuple = ()


def run_station(profile: Profile, params: SyntheticStationParams, config: ModelConfig,
                keep_verdicts: bool = False) -> StationResult:
    primary, secondary = generate_station(params)
    tests = select_test_samples(primary, profile.selector, config.utc_offset_hours)
    spec = replace(profile.perturbation, seed=params.seed + 1)
    perturbed = perturb(primary, tests, spec)

    T = config.calibration_length
    if len(primary) <= T:
        raise ValueError(f"{len(primary)} hours leave nothing after the {T}-hour calibration window")
    values = np.column_stack([perturbed.values, secondary.values])
    cal = calibrate(values[:T], config)
    mask = np.zeros(len(primary), dtype=bool)
    mask[tests] = True
    qc = run_qc(cal.state, cal.model, values[T:], config, mask[T:])

    tested = qc.tested
    truth = perturbed.truth_labels[T:][tested]
    counts = ConfusionCounts.from_labels(truth, qc.flagged[tested])
    verdicts = ()
    if keep_verdicts:
        verdicts = tuple(_verdicts(profile, params, perturbed, qc, T))
    return StationResult(params.station_id, counts, verdicts)


def _verdicts(profile: Profile, params, series: LabeledSeries, qc, offset: int):
    idx = np.flatnonzero(qc.tested)
    obs, mu, sd = qc.observed[idx], qc.predicted_mean[idx], qc.predicted_std[idx]
    if profile.name == "humidity":
        dry = dry_bulb_for(series, params.seed + 2)[offset + idx]
        step = 1e-3
        rh_mu = dew_point_to_rh(mu, dry)
        slope = (dew_point_to_rh(mu + step, dry) - dew_point_to_rh(mu - step, dry)) / (2 * step)
        obs, mu, sd = dew_point_to_rh(obs, dry), rh_mu, np.abs(slope) * sd
    for k, i in enumerate(idx):
        yield Verdict(
            sample_time=series.time_at(offset + i),
            observed=float(obs[k]),
            predicted_mean=float(mu[k]),
            predicted_std=float(sd[k]),
            p_value=float(qc.p_values[i]),
            label=Label.SUSPECT if qc.flagged[i] else Label.VALID,
        )


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    profile: str
    seed: int
    metrics: MetricsReport
    verdicts: dict

    @property
    def verdict_variable(self) -> str:
        return "rh_percent" if self.profile == "humidity" else PROFILES[self.profile].variable


class StationError(RuntimeError):
    """A single synthetic station failed; the message names it."""


def _station_job(args):
    profile_name, params, config, keep = args
    try:
        return run_station(PROFILES[profile_name], params, config, keep)
    except Exception as exc:
        raise StationError(f"station {params.station_id} (seed {params.seed}): {exc}") from exc


def run_benchmark(stations: int, variable_profile: str, config: ModelConfig | None = None,
                  seed: int = 0, length_days: int = 730, jobs: int = 1,
                  keep_verdicts: bool = False) -> BenchmarkResult:
    """Simulate ``stations`` stations and pool their confusion counts."""
    if variable_profile not in PROFILES:
        raise ValueError(f"unknown profile {variable_profile!r}; choose from {sorted(PROFILES)}")
    if stations < 1:
        raise ValueError("stations must be >= 1")
    profile = PROFILES[variable_profile]
    config = profile_config(profile, config)
    seeds = np.random.SeedSequence(seed).spawn(stations)
    jobs_args = []
    for k, ss in enumerate(seeds):
        params = profile.draw_params(np.random.default_rng(ss), length_days, f"{variable_profile}-{k:03d}")
        jobs_args.append((variable_profile, params, config, keep_verdicts))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_station_job, jobs_args))
    else:
        results = [_station_job(a) for a in jobs_args]

    per_station = {}
    verdicts = {}
    for r, a in zip(results, jobs_args):
        sid = a[1].station_id
        per_station[sid] = r.counts
        if keep_verdicts:
            verdicts[sid] = list(r.verdicts)
    return BenchmarkResult(variable_profile, seed, MetricsReport(per_station), verdicts)
