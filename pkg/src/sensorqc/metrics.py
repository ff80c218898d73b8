"""Confusion counts and detection rates."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, truth, flagged) -> "ConfusionCounts":
        truth = np.asarray(truth, dtype=bool)
        flagged = np.asarray(flagged, dtype=bool)
        return cls(
            tp=int(np.sum(truth & flagged)),
            fp=int(np.sum(~truth & flagged)),
            tn=int(np.sum(~truth & ~flagged)),
            fn=int(np.sum(truth & ~flagged)),
        )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def compute_rates(c: ConfusionCounts) -> tuple[float | None, float | None, float | None]:
    """Hit rate, false positive rate and accuracy; ``None`` for an empty denominator."""
    return (
        _ratio(c.tp, c.tp + c.fn),
        _ratio(c.fp, c.fp + c.tn),
        _ratio(c.tp + c.tn, c.total),
    )


def merge(counts) -> ConfusionCounts:
    total = ConfusionCounts()
    for c in counts:
        total = total + c
    return total


def _mean_present(values) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


@dataclass(frozen=True)
class MetricsReport:
    """Pooled (micro-averaged) rates plus per-station means (macro)."""

    per_station: dict[str, ConfusionCounts] = field(default_factory=dict)

    @property
    def aggregate(self) -> ConfusionCounts:
        return merge(self.per_station[k] for k in sorted(self.per_station))

    @property
    def rates(self):
        return compute_rates(self.aggregate)

    @property
    def hit_rate(self):
        return self.rates[0]

    @property
    def false_positive_rate(self):
        return self.rates[1]

    @property
    def accuracy(self):
        return self.rates[2]

    @property
    def macro_rates(self):
        per = [compute_rates(c) for c in self.per_station.values()]
        return tuple(_mean_present(col) for col in zip(*per)) if per else (None, None, None)

    def to_dict(self) -> dict:
        hit, fpr, acc = self.rates
        mhit, mfpr, macc = self.macro_rates
        return {
            "aggregate": asdict(self.aggregate),
            "hit_rate": hit,
            "false_positive_rate": fpr,
            "accuracy": acc,
            "macro": {"hit_rate": mhit, "false_positive_rate": mfpr, "accuracy": macc},
            "per_station": {k: asdict(self.per_station[k]) for k in sorted(self.per_station)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls({k: ConfusionCounts(**v) for k, v in data["per_station"].items()})

    def format_table(self) -> str:
        def pct(v):
            return "    n/a" if v is None else f"{100 * v:6.2f}%"

        agg = self.aggregate
        lines = [
            f"{'':10} {'hit rate':>9} {'FPR':>9} {'accuracy':>9}",
            f"{'micro':10} {pct(self.hit_rate):>9} {pct(self.false_positive_rate):>9} {pct(self.accuracy):>9}",
        ]
        mhit, mfpr, macc = self.macro_rates
        lines.append(f"{'macro':10} {pct(mhit):>9} {pct(mfpr):>9} {pct(macc):>9}")
        lines.append(
            f"stations={len(self.per_station)} tp={agg.tp} fp={agg.fp} tn={agg.tn} fn={agg.fn}"
        )
        return "\n".join(lines)
