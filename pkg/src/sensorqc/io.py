"""Hourly series ingestion, reports, plot data and filter-state snapshots."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .detection import Label, Verdict
from .kalman import FilterState
from .metrics import MetricsReport
from .model import NoiseEstimate

REPORT_SCHEMA_VERSION = 1
SNAPSHOT_SCHEMA_VERSION = 1
SNAP_TOLERANCE = timedelta(minutes=5)
HOUR = timedelta(hours=1)
VARIABLES = ("temperature_c", "dew_point_c", "wind_gust_ms", "rh_percent")

SERIES_HEADER = ["timestamp", "value"]
LABELED_HEADER = ["timestamp", "value", "label"]
PLOT_HEADER = ["timestamp", "observed", "predicted_mean", "predicted_std", "secondary", "flag"]


class IngestError(ValueError):
    """CSV content could not be turned into an hourly series.

    ``problems`` lists ``(line_number, message)`` pairs.
    """

    def __init__(self, path, problems):
        self.path = str(path)
        self.problems = list(problems)
        detail = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems[:10])
        more = f" (+{len(self.problems) - 10} more)" if len(self.problems) > 10 else ""
        super().__init__(f"{self.path}: {detail}{more}")


class StateMismatchError(ValueError):
    """Snapshot was produced for a different model."""


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp and convert it to UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError("timestamp lacks a UTC offset")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _format_float(v: float) -> str:
    return "" if not math.isfinite(v) else repr(float(v))


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    """Values on an hourly UTC grid; NaN marks a gap."""

    station_id: str
    variable: str
    start: datetime | None
    values: np.ndarray
    truth_labels: np.ndarray | None = None
    rejected_rows: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"variable must be one of {VARIABLES}, got {self.variable!r}")
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 1:
            raise ValueError("values must be one-dimensional")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.start is not None:
            start = self.start.astimezone(timezone.utc)
            if start.minute or start.second or start.microsecond:
                raise ValueError("series start must be aligned to the hour")
            object.__setattr__(self, "start", start)
        elif vals.size:
            raise ValueError("non-empty series needs a start time")
        if self.truth_labels is not None:
            labels = np.array(self.truth_labels, dtype=bool, copy=True)
            if labels.shape != vals.shape:
                raise ValueError("truth_labels must match values in length")
            labels.setflags(write=False)
            object.__setattr__(self, "truth_labels", labels)

    def __len__(self) -> int:
        return self.values.size

    @property
    def gap_fraction(self) -> float:
        return float(np.mean(np.isnan(self.values))) if len(self) else 0.0

    def time_at(self, i: int) -> datetime:
        return self.start + i * HOUR

    def times(self) -> list[datetime]:
        return [self.time_at(i) for i in range(len(self))]

    def hour_index(self) -> int:
        """Hours from the Unix epoch to ``start``."""
        return hours_since_epoch(self.start)

    def with_values(self, values, truth_labels=None) -> "LabeledSeries":
        return LabeledSeries(
            self.station_id,
            self.variable,
            self.start,
            values,
            self.truth_labels if truth_labels is None else truth_labels,
        )

    def slice(self, begin: int, end: int | None = None) -> "LabeledSeries":
        end = len(self) if end is None else end
        labels = None if self.truth_labels is None else self.truth_labels[begin:end]
        start = self.time_at(begin) if end > begin else None
        return LabeledSeries(self.station_id, self.variable, start, self.values[begin:end], labels)


_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def hours_since_epoch(ts: datetime) -> int:
    return int((ts - _EPOCH) // HOUR)


def time_from_hours(hours: int) -> datetime:
    return _EPOCH + hours * HOUR


def _parse_label(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true"):
        return True
    if lowered in ("0", "false", ""):
        return False
    raise ValueError(f"bad label {text!r}")


def ingest_csv(path, variable: str = "temperature_c", station_id: str | None = None) -> LabeledSeries:
    """Read ``timestamp,value`` (or ``timestamp,value,label``) rows onto an hourly grid.

    Timestamps more than five minutes from an hour are rejected and listed in
    ``rejected_rows``; unparseable rows and conflicting duplicates raise
    :class:`IngestError`. An empty value is a gap.
    """
    path = Path(path)
    station_id = station_id or path.stem
    problems, rejected = [], []
    rows: dict[datetime, tuple[float, bool, int]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header not in (SERIES_HEADER, LABELED_HEADER):
            raise IngestError(path, [(1, f"header must be {','.join(SERIES_HEADER)} or {','.join(LABELED_HEADER)}")])
        labeled = header == LABELED_HEADER
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                problems.append((lineno, f"expected {len(header)} fields, got {len(row)}"))
                continue
            try:
                ts = parse_timestamp(row[0])
                value = float(row[1]) if row[1].strip() else math.nan
                label = _parse_label(row[2]) if labeled else False
            except ValueError as exc:
                problems.append((lineno, str(exc)))
                continue
            hour = (ts + timedelta(minutes=30)).replace(minute=0, second=0, microsecond=0)
            if abs(ts - hour) > SNAP_TOLERANCE:
                rejected.append((lineno, f"{row[0]} is more than 5 minutes from the hour"))
                continue
            if hour in rows:
                prev_value, prev_label, prev_line = rows[hour]
                same = (prev_value == value or (math.isnan(prev_value) and math.isnan(value)))
                if not same or prev_label != label:
                    problems.append(
                        (lineno, f"duplicate hour {format_timestamp(hour)} conflicts with line {prev_line}")
                    )
                continue
            rows[hour] = (value, label, lineno)
    if problems:
        raise IngestError(path, problems)
    if not rows:
        return LabeledSeries(station_id, variable, None, np.empty(0), np.empty(0, bool) if labeled else None,
                             tuple(rejected))
    hours = sorted(rows)
    start = hours[0]
    n = int((hours[-1] - start) // HOUR) + 1
    values = np.full(n, np.nan)
    labels = np.zeros(n, dtype=bool)
    for h in hours:
        i = int((h - start) // HOUR)
        values[i], labels[i], _ = rows[h]
    return LabeledSeries(station_id, variable, start, values, labels if labeled else None, tuple(rejected))


def write_series_csv(series: LabeledSeries, path) -> None:
    """Write every grid hour; gaps become empty values."""
    labeled = series.truth_labels is not None
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELED_HEADER if labeled else SERIES_HEADER)
        for i, v in enumerate(series.values):
            row = [format_timestamp(series.time_at(i)), _format_float(v)]
            if labeled:
                row.append("1" if series.truth_labels[i] else "0")
            w.writerow(row)


@dataclass(frozen=True, eq=False)
class AlignedStreams:
    """Primary and secondary readings on a common hourly grid, shape ``(n, 2)``."""

    start: datetime
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]


def align_streams(primary: LabeledSeries, secondary: LabeledSeries | None) -> AlignedStreams:
    """Place the secondary stream on the primary's grid.

    The grid spans the primary series; secondary hours outside it are
    dropped and primary hours the secondary lacks carry a secondary gap.
    """
    n = len(primary)
    if n == 0:
        raise ValueError("primary series is empty")
    out = np.full((n, 2), np.nan)
    out[:, 0] = primary.values
    if secondary is None:
        return AlignedStreams(primary.start, out)
    if len(secondary) == 0:
        raise ValueError("primary and secondary series do not overlap")
    offset = int((secondary.start - primary.start) // HOUR)
    lo, hi = max(offset, 0), min(offset + len(secondary), n)
    if hi <= lo:
        raise ValueError(
            f"primary {format_timestamp(primary.start)}..{format_timestamp(primary.time_at(n - 1))} "
            f"and secondary {format_timestamp(secondary.start)}.."
            f"{format_timestamp(secondary.time_at(len(secondary) - 1))} do not overlap"
        )
    out[lo:hi, 1] = secondary.values[lo - offset:hi - offset]
    return AlignedStreams(primary.start, out)


def _encode_time(t):
    return format_timestamp(t) if isinstance(t, datetime) else t


def _decode_time(t):
    return parse_timestamp(t) if isinstance(t, str) else t


def verdict_to_dict(v: Verdict) -> dict:
    return {
        "time": _encode_time(v.sample_time),
        "observed": v.observed,
        "predicted_mean": v.predicted_mean,
        "predicted_std": v.predicted_std,
        "p_value": v.p_value,
        "label": v.label.value,
    }


def verdict_from_dict(d: dict) -> Verdict:
    return Verdict(
        sample_time=_decode_time(d["time"]),
        observed=d["observed"],
        predicted_mean=d["predicted_mean"],
        predicted_std=d["predicted_std"],
        p_value=d["p_value"],
        label=Label(d["label"]),
    )


def write_report(verdicts, metrics: MetricsReport | None, path, extra: dict | None = None) -> None:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "verdicts": [verdict_to_dict(v) for v in verdicts],
        "metrics": None if metrics is None else metrics.to_dict(),
    }
    if extra:
        doc.update(extra)
    path = Path(path)
    try:
        path.write_text(json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc


def read_report(path) -> tuple[list[Verdict], MetricsReport | None, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema_version {doc.get('schema_version')!r}")
    metrics = None if doc["metrics"] is None else MetricsReport.from_dict(doc["metrics"])
    return [verdict_from_dict(d) for d in doc["verdicts"]], metrics, doc


def write_plot_data(path, start: datetime, observed, predicted_mean, predicted_std,
                    secondary=None, flags=None) -> None:
    """One CSV row per grid hour.

    ``flags`` holds ``True`` (suspect), ``False`` (valid) or ``None`` (not
    tested) per hour and is written as ``suspect``/``valid``/empty.
    """
    n = len(observed)
    secondary = np.full(n, np.nan) if secondary is None else secondary
    flags = [None] * n if flags is None else flags
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLOT_HEADER)
            for i in range(n):
                flag = "" if flags[i] is None else ("suspect" if flags[i] else "valid")
                w.writerow([
                    format_timestamp(start + i * HOUR),
                    _format_float(observed[i]),
                    _format_float(predicted_mean[i]),
                    _format_float(predicted_std[i]),
                    _format_float(secondary[i]),
                    flag,
                ])
    except OSError as exc:
        raise OSError(f"cannot write plot data {path}: {exc.strerror}") from exc


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Filter state plus what is needed to rebuild and verify its model.

    ``state.t`` counts hours since the Unix epoch.
    """

    state: FilterState
    model_hash: str
    noise: NoiseEstimate

    @property
    def time(self) -> datetime:
        return time_from_hours(self.state.t)

    def check_model(self, model_hash: str) -> None:
        if model_hash != self.model_hash:
            raise StateMismatchError(
                f"state snapshot was made for model {self.model_hash[:12]}, "
                f"configuration gives {model_hash[:12]}"
            )


def save_snapshot(path, snapshot: Snapshot) -> None:
    s = snapshot.state
    doc = {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "t": s.t,
        "time": format_timestamp(snapshot.time),
        "model_hash": snapshot.model_hash,
        "noise": {
            "epsilon_x": snapshot.noise.epsilon_x,
            "epsilon_y": snapshot.noise.epsilon_y,
            "raw_x": snapshot.noise.raw_x,
            "raw_y": snapshot.noise.raw_y,
        },
        "f": s.f.tolist(),
        "F": s.F.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_snapshot(path) -> Snapshot:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
        raise StateMismatchError(f"unsupported snapshot schema_version {doc.get('schema_version')!r}")
    state = FilterState(np.array(doc["f"], dtype=float), np.array(doc["F"], dtype=float), doc["t"])
    return Snapshot(state=state, model_hash=doc["model_hash"], noise=NoiseEstimate(**doc["noise"]))
