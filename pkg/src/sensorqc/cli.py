"""``sensorqc`` command line.

Exit codes: 0 success, 2 usage or validation error, 3 data error,
4 state snapshot incompatible with the configured model.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as benchmod
from .config import ConfigError, format_config, load_config, read_config_file
from .detection import Label, Verdict
from .io import (
    HOUR,
    IngestError,
    LabeledSeries,
    Snapshot,
    StateMismatchError,
    align_streams,
    ingest_csv,
    load_snapshot,
    save_snapshot,
    time_from_hours,
    write_plot_data,
    write_report,
    write_series_csv,
    VARIABLES,
)
from .kalman import FilterState
from .metrics import ConfusionCounts, MetricsReport
from .model import assemble_model
from .noise import diurnal_highpass
from .pipeline import calibrate, run_qc

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STATE = 0, 2, 3, 4


class UsageError(Exception):
    pass


# flag name -> ModelConfig field
_OVERRIDES = {
    "tau": "period_tau",
    "threshold": "p_threshold",
    "tpws_floor": "tpws_noise_floor",
    "nwp_multiplier": "nwp_noise_multiplier",
    "process_noise_scale": "process_noise_scale",
    "prior_cov_scale": "prior_cov_scale",
    "calibration_days": "calibration_days",
    "utc_offset": "utc_offset_hours",
    "selector": "test_selector",
    "noise_structure": "process_noise_structure",
}


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model overrides (take precedence over the config file)")
    g.add_argument("--config", help="key = value config file (default: $SENSORQC_CONFIG)")
    g.add_argument("--tau", type=int, help="seasonal period in hours")
    g.add_argument("--threshold", type=float, help="two-sided p-value threshold")
    g.add_argument("--tpws-floor", type=float, help="lower bound on station noise")
    g.add_argument("--nwp-multiplier", type=float, help="forecast noise floor as a multiple of station noise")
    g.add_argument("--process-noise-scale", type=float)
    g.add_argument("--prior-cov-scale", type=float)
    g.add_argument("--calibration-days", type=int)
    g.add_argument("--utc-offset", type=float, help="station local time minus UTC, hours")
    g.add_argument("--selector", choices=["all", "daily_min", "daily_max", "fixed_hours"])
    g.add_argument("--noise-structure", choices=["components", "isotropic"])
    g.add_argument("--test-hours", help="comma-separated local hours for fixed_hours")
    g.add_argument("--reject-suspects", action="store_true", default=None,
                   help="leave flagged readings out of the state update")


def _config_from(args, **forced):
    overrides = {field: getattr(args, flag) for flag, field in _OVERRIDES.items()}
    if args.test_hours:
        try:
            overrides["test_hours"] = tuple(int(h) for h in args.test_hours.split(","))
        except ValueError:
            raise ConfigError(f"--test-hours must be comma-separated integers, got {args.test_hours!r}")
    overrides["reject_suspects_from_update"] = args.reject_suspects
    overrides.update(forced)
    return load_config(args.config, **overrides)


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _ingest(args, with_secondary=True):
    primary = ingest_csv(_require_file(args.input, "input file"), args.variable, args.station)
    secondary = None
    if with_secondary and getattr(args, "secondary", None):
        secondary = ingest_csv(_require_file(args.secondary, "secondary file"), args.variable, args.station)
    for s in (primary, secondary):
        if s is not None and s.rejected_rows:
            print(f"warning: {len(s.rejected_rows)} off-grid row(s) rejected", file=sys.stderr)
    return primary, secondary


def _local_hour(ts, config) -> int:
    return int(((ts.hour + ts.minute / 60 + config.utc_offset_hours) % 24) // 1)


def _calibrate_series(primary: LabeledSeries, secondary, config):
    if len(primary) == 0:
        raise ValueError("input contains no readings")
    T = min(len(primary), config.calibration_length)
    grid = align_streams(primary, secondary).values[:T]
    cal = calibrate(grid, config, t0=primary.hour_index(), start_hour_of_day=_local_hour(primary.start, config))
    return cal, T


def _noise_summary(noise) -> dict:
    out = {"epsilon_x": noise.epsilon_x, "raw_x": noise.raw_x, "floor_x_active": noise.floor_x_active}
    if noise.epsilon_y is not None:
        out.update(epsilon_y=noise.epsilon_y, raw_y=noise.raw_y, floor_y_active=noise.floor_y_active)
    return out


def _print_noise(noise) -> None:
    print(f"epsilon_x = {noise.epsilon_x:.6g}  (raw {noise.raw_x:.6g}, floor {'active' if noise.floor_x_active else 'inactive'})")
    if noise.epsilon_y is not None:
        print(f"epsilon_y = {noise.epsilon_y:.6g}  (raw {noise.raw_y:.6g}, floor {'active' if noise.floor_y_active else 'inactive'})")


def cmd_calibrate(args) -> int:
    config = _config_from(args, stream_count=2 if args.secondary else 1)
    primary, secondary = _ingest(args)
    cal, T = _calibrate_series(primary, secondary, config)
    save_snapshot(args.out_state, Snapshot(cal.state, cal.model.model_hash, cal.noise))
    summary = {
        "station_id": primary.station_id,
        "window_start": primary.start.isoformat(),
        "window_hours": T,
        "state_time": time_from_hours(cal.state.t).isoformat(),
        "model_hash": cal.model.model_hash,
        **_noise_summary(cal.noise),
    }
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=1) + "\n")
    print(f"calibrated on {T} hourly samples; state at {summary['state_time']}")
    _print_noise(cal.noise)
    return EXIT_OK


def _verdicts(series_start, qc, indices) -> list[Verdict]:
    return [
        Verdict(
            sample_time=series_start + i * HOUR,
            observed=float(qc.observed[i]),
            predicted_mean=float(qc.predicted_mean[i]),
            predicted_std=float(qc.predicted_std[i]),
            p_value=float(qc.p_values[i]),
            label=Label.SUSPECT if qc.flagged[i] else Label.VALID,
        )
        for i in indices
    ]


def _test_mask(series: LabeledSeries, config) -> np.ndarray:
    mask = np.zeros(len(series), dtype=bool)
    selector = benchmod.selector_from_config(config)
    mask[benchmod.select_test_samples(series, selector, config.utc_offset_hours)] = True
    return mask


def _metrics_for(series: LabeledSeries, qc, station_id: str):
    if series.truth_labels is None:
        return None
    t = qc.tested
    return MetricsReport({station_id: ConfusionCounts.from_labels(series.truth_labels[t], qc.flagged[t])})


def _qc_series(state: FilterState, model, config, primary: LabeledSeries, secondary):
    grid = align_streams(primary, secondary).values
    qc = run_qc(state, model, grid, config, _test_mask(primary, config))
    return qc, grid


def cmd_run(args) -> int:
    config = _config_from(args, stream_count=2 if args.secondary else 1)
    snap = load_snapshot(_require_file(args.state, "state snapshot"))
    try:
        model = assemble_model(config, snap.noise)
    except ValueError as exc:
        raise StateMismatchError(f"snapshot does not fit the configuration: {exc}") from exc
    snap.check_model(model.model_hash)
    primary, secondary = _ingest(args)

    # keep only hours after the snapshot; hours between it and the first new row are gaps
    first = snap.state.t + 1
    if len(primary) and primary.hour_index() + len(primary) > first:
        lead = primary.hour_index() - first
        if lead >= 0:
            vals = np.concatenate([np.full(lead, np.nan), primary.values])
            labels = None if primary.truth_labels is None else np.concatenate([np.zeros(lead, bool), primary.truth_labels])
        else:
            vals, labels = primary.values[-lead:], None if primary.truth_labels is None else primary.truth_labels[-lead:]
        new = LabeledSeries(primary.station_id, primary.variable, time_from_hours(first), vals, labels)
    else:
        new = None

    if new is None:
        write_report([], None, args.report, extra={"station_id": primary.station_id, "new_hours": 0})
        if args.plot_data:
            write_plot_data(args.plot_data, time_from_hours(first), [], [], [])
        print("no readings after the snapshot; nothing to do")
        return EXIT_OK

    qc, grid = _qc_series(snap.state, model, config, new, secondary)
    tested = np.flatnonzero(qc.tested)
    verdicts = _verdicts(new.start, qc, tested)
    metrics = _metrics_for(new, qc, new.station_id)
    write_report(verdicts, metrics, args.report, extra={"station_id": new.station_id, "new_hours": len(new)})
    if args.plot_data:
        flags = [bool(qc.flagged[i]) if qc.tested[i] else None for i in range(len(new))]
        write_plot_data(args.plot_data, new.start, qc.observed, qc.predicted_mean, qc.predicted_std,
                        grid[:, 1], flags)
    save_snapshot(args.state, Snapshot(qc.final_state, model.model_hash, snap.noise))
    print(f"{len(new)} new hours, {tested.size} tested, {int(qc.flagged.sum())} suspect")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config_from(args, stream_count=2 if args.secondary else 1)
    primary, secondary = _ingest(args)
    if primary.truth_labels is None:
        raise UsageError(f"{args.input} has no label column; eval needs timestamp,value,label")
    cal, T = _calibrate_series(primary, secondary, config)
    if len(primary) <= T:
        raise ValueError(f"input has {len(primary)} hours, nothing left after the {T}-hour calibration window")
    rest = primary.slice(T)
    qc, _ = _qc_series(cal.state, cal.model, config, rest, secondary)
    metrics = _metrics_for(rest, qc, primary.station_id)
    verdicts = _verdicts(rest.start, qc, np.flatnonzero(qc.tested))
    if args.report:
        write_report(verdicts, metrics, args.report, extra={"noise": _noise_summary(cal.noise)})
    print(metrics.format_table())
    return EXIT_OK


def cmd_synth(args) -> int:
    prof = benchmod.PROFILES[args.profile]
    rng = np.random.default_rng(np.random.SeedSequence(args.seed).spawn(args.station_index + 1)[-1])
    params = prof.draw_params(rng, args.length_days, f"{args.profile}-{args.station_index:03d}")
    primary, secondary = benchmod.generate_station(params)
    config = benchmod.profile_config(prof)
    tests = benchmod.select_test_samples(primary, prof.selector, config.utc_offset_hours)
    perturbed = benchmod.perturb(primary, tests, replace(prof.perturbation, seed=params.seed + 1))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_series_csv(perturbed, out / "primary.csv")
    if prof.stream_count == 2:
        write_series_csv(secondary, out / "secondary.csv")
    (out / "station.conf").write_text(format_config(config))
    print(f"wrote {params.station_id} ({len(primary)} hours) to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    base = _config_from(args) if args.config or any(getattr(args, f) is not None for f in _OVERRIDES) else None
    bench_cfg = read_config_file(args.config).bench if args.config else {}
    profile = args.profile or bench_cfg.get("bench_profile")
    if profile not in benchmod.PROFILES:
        raise UsageError(f"--profile must be one of {sorted(benchmod.PROFILES)}")
    stations = args.stations if args.stations is not None else bench_cfg.get("bench_stations", 100)
    seed = args.seed if args.seed is not None else bench_cfg.get("bench_seed", 0)
    length = args.length_days if args.length_days is not None else bench_cfg.get("bench_length_days", 730)
    result = benchmod.run_benchmark(stations, profile, base, seed=seed, length_days=length,
                                    jobs=args.jobs, keep_verdicts=args.verdicts)
    if args.report:
        verdicts = [v for sid in sorted(result.verdicts) for v in result.verdicts[sid]]
        write_report(verdicts, result.metrics, args.report, extra={
            "profile": profile, "stations": stations, "seed": seed, "length_days": length,
            "verdict_variable": result.verdict_variable,
        })
    hit, fpr, acc = result.metrics.rates
    fmt = lambda r: "n/a" if r is None else f"{r:.4f}"
    print(f"profile={profile} stations={stations} seed={seed}")
    print(f"hit_rate={fmt(hit)} false_positive_rate={fmt(fpr)} accuracy={fmt(acc)}")
    return EXIT_OK


def cmd_dump_filter(args) -> int:
    filt = diurnal_highpass(args.tau)
    fc = filt.cutoff_cycles_per_hour
    doc = {
        "period_tau": args.tau,
        "order": filt.order,
        "cutoff_cycles_per_hour": fc,
        "b": filt.numerator_coeffs.tolist(),
        "a": filt.denominator_coeffs.tolist(),
        "pole_magnitudes": np.abs(filt.poles).tolist(),
        "stable": filt.is_stable(),
        "gain_db_at_cutoff": float(filt.gain_db([fc])[0]),
        "gain_db_at_dc": float(filt.gain_db([0.0])[0]),
    }
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sensorqc", description="Kalman-filter quality control for hourly station data.")
    sub = p.add_subparsers(dest="command", required=True)

    def data_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--input", required=True, help="primary CSV (timestamp,value[,label])")
        sp.add_argument("--secondary", help="forecast CSV on the same variable")
        sp.add_argument("--variable", default="temperature_c", choices=VARIABLES)
        sp.add_argument("--station", help="station id (default: input file stem)")
        _model_flags(sp)
        return sp

    sp = data_cmd("calibrate", "estimate noise and the initial state from a calibration window")
    sp.add_argument("--out-state", required=True)
    sp.add_argument("--summary", help="also write the calibration summary as JSON")
    sp.set_defaults(func=cmd_calibrate)

    sp = data_cmd("run", "resume from a snapshot, classify new readings, update the snapshot")
    sp.add_argument("--state", required=True)
    sp.add_argument("--report", required=True)
    sp.add_argument("--plot-data")
    sp.set_defaults(func=cmd_run)

    sp = data_cmd("eval", "calibrate and classify a labeled series, report rates")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="write one synthetic station as CSV")
    sp.add_argument("--profile", required=True, choices=sorted(benchmod.PROFILES))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--station-index", type=int, default=0)
    sp.add_argument("--length-days", type=int, default=730)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", help="run the synthetic benchmark")
    sp.add_argument("--profile", choices=sorted(benchmod.PROFILES))
    sp.add_argument("--stations", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--length-days", type=int)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--report")
    sp.add_argument("--verdicts", action="store_true", help="include every verdict in the report")
    _model_flags(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("dump-filter", help="print the noise-estimation high-pass filter")
    sp.add_argument("--tau", type=int, default=24)
    sp.set_defaults(func=cmd_dump_filter)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "station", "") is None and getattr(args, "input", None):
        args.station = Path(args.input).stem
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StateMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except (IngestError, benchmod.StationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
