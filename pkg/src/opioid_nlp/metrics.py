"""Confusion counts, the four gate metrics and percent agreement."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .rules import POSITIVE

DEFAULT_GATE = 0.85
METRIC_NAMES = ("precision", "recall", "specificity", "accuracy")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    precision: float | None
    recall: float | None
    specificity: float | None
    accuracy: float | None
    gate_threshold: float = DEFAULT_GATE

    @property
    def gate_passed(self) -> bool:
        # an undefined metric fails the gate
        return all(v is not None and v >= self.gate_threshold for v in self.values().values())

    def values(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def confusion(predicted, gold) -> ConfusionMatrix:
    """Tally cells with Positive as the positive class.

    Accepts two aligned sequences, or two mappings keyed by snippet id (which
    must have identical key sets).
    """
    if isinstance(predicted, Mapping) or isinstance(gold, Mapping):
        if not (isinstance(predicted, Mapping) and isinstance(gold, Mapping)):
            raise TypeError("pass two mappings or two sequences")
        missing = set(gold) ^ set(predicted)
        if missing:
            raise ValueError(f"snippet ids differ between predictions and gold, e.g. {sorted(missing)[:3]}")
        keys = sorted(gold)
        predicted = [predicted[k] for k in keys]
        gold = [gold[k] for k in keys]
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions vs {len(gold)} gold labels")
    tp = fp = fn = tn = 0
    for p, g in zip(predicted, gold):
        if p == POSITIVE:
            if g == POSITIVE:
                tp += 1
            else:
                fp += 1
        elif g == POSITIVE:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def compute_metrics(m: ConfusionMatrix, gate_threshold: float = DEFAULT_GATE) -> MetricReport:
    return MetricReport(
        precision=_ratio(m.tp, m.tp + m.fp),
        recall=_ratio(m.tp, m.tp + m.fn),
        specificity=_ratio(m.tn, m.tn + m.fp),
        accuracy=_ratio(m.tp + m.tn, m.total),
        gate_threshold=gate_threshold,
    )


def percent_agreement(a: Sequence, b: Sequence) -> float:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("need at least one paired label")
    return sum(x == y for x, y in zip(a, b)) / len(a)
