"""Accuracy and group-fairness metrics over prediction logs.

Five metrics are computed from a (group, actual, predicted) count
tensor:

- ``accuracy``: overall fraction of correct predictions.
- ``skewed_error_ratio``: worst group error rate over best group error
  rate (>= 1; infinity when one group is perfect and another is not).
- ``equal_opportunity``: mean over classes of the across-group variance
  of per-group recall.
- ``bias_amplification``: mean over predicted classes of the dominant
  group's share of that class's predictions, minus the uniform share.
- ``demographic_parity``: mean over classes of the across-group
  variance of prediction rates.

Variances are population variances. All ratio arithmetic uses plain
Python floats in a fixed iteration order (groups, then classes,
ascending), so an independent per-record recount reproduces every value
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DataFormatError, UndefinedMetricError

CONVENTIONS = {
    "ser": "max_group_error / min_group_error",
    "variance": "population",
}

METRIC_NAMES = ("acc", "ser", "eo", "ba", "dp")


@dataclass(frozen=True)
class PredictionRecord:
    """One scored example: predicted class, actual class, sensitive group."""

    predicted: int
    actual: int
    group: int


@dataclass(frozen=True)
class CountTensor:
    """counts[g][y][p] = number of records with group g, actual y, predicted p."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))
        if self.counts.ndim != 3 or self.counts.shape[1] != self.counts.shape[2]:
            raise ValueError("counts must have shape (num_groups, num_classes, num_classes)")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def num_groups(self) -> int:
        return self.counts.shape[0]

    @property
    def num_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def tally(records: Sequence[PredictionRecord], num_classes: int, num_groups: int) -> CountTensor:
    """Exact, order-independent counting of a prediction log."""
    counts = np.zeros((num_groups, num_classes, num_classes), dtype=np.int64)
    if records:
        pred = np.array([r.predicted for r in records], dtype=np.int64)
        actual = np.array([r.actual for r in records], dtype=np.int64)
        group = np.array([r.group for r in records], dtype=np.int64)
        for name, arr, limit in (
            ("predicted", pred, num_classes),
            ("actual", actual, num_classes),
            ("group", group, num_groups),
        ):
            if arr.min() < 0 or arr.max() >= limit:
                raise ValueError(f"{name} index out of range [0, {limit})")
        np.add.at(counts, (group, actual, pred), 1)
    return CountTensor(counts)


def records_from_arrays(
    predicted: np.ndarray, actual: np.ndarray, group: np.ndarray
) -> list[PredictionRecord]:
    return [
        PredictionRecord(int(p), int(a), int(g))
        for p, a, g in zip(predicted, actual, group)
    ]


def _group_totals(t: CountTensor) -> list[int]:
    return [int(t.counts[g].sum()) for g in range(t.num_groups)]


def _group_errors(t: CountTensor) -> list[float]:
    """Error rate per group; requires every group to have records."""
    errors = []
    for g in range(t.num_groups):
        total_g = int(t.counts[g].sum())
        if total_g == 0:
            raise UndefinedMetricError(f"group {g} has no records")
        correct_g = sum(int(t.counts[g, c, c]) for c in range(t.num_classes))
        errors.append(1.0 - correct_g / total_g)
    return errors


def accuracy(t: CountTensor) -> float:
    total = t.total
    if total == 0:
        raise UndefinedMetricError("accuracy is undefined for an empty log")
    correct = sum(
        int(t.counts[g, c, c]) for g in range(t.num_groups) for c in range(t.num_classes)
    )
    return correct / total


def skewed_error_ratio(t: CountTensor) -> float:
    """max/min of per-group error rates; 1.0 when all groups are perfect,
    infinity when only some are."""
    errors = _group_errors(t)
    max_e, min_e = max(errors), min(errors)
    if max_e == 0.0:
        return 1.0
    if min_e == 0.0:
        return math.inf
    return max_e / min_e


def _population_variance(values: list[float]) -> float:
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)


def equal_opportunity(t: CountTensor) -> float:
    """Mean across-group recall variance, over classes where at least two
    groups have ground-truth samples."""
    variances = []
    for c in range(t.num_classes):
        recalls = []
        for g in range(t.num_groups):
            gt = int(t.counts[g, c, :].sum())
            if gt > 0:
                recalls.append(int(t.counts[g, c, c]) / gt)
        if len(recalls) >= 2:
            variances.append(_population_variance(recalls))
    if not variances:
        raise UndefinedMetricError("no class has ground-truth samples in two or more groups")
    return sum(variances) / len(variances)


def bias_amplification(t: CountTensor) -> float:
    """Mean dominant-group share of each predicted class, minus 1/num_groups."""
    if t.total == 0:
        raise UndefinedMetricError("bias amplification is undefined for an empty log")
    shares = []
    for c in range(t.num_classes):
        per_group = [int(t.counts[g, :, c].sum()) for g in range(t.num_groups)]
        total_c = sum(per_group)
        if total_c > 0:
            shares.append(max(per_group) / total_c)
    return sum(shares) / len(shares) - 1.0 / t.num_groups


def demographic_parity(t: CountTensor) -> float:
    """Mean across-group variance of prediction rates, over all classes."""
    totals = _group_totals(t)
    if any(n == 0 for n in totals):
        empty = totals.index(0)
        raise UndefinedMetricError(f"group {empty} has no records")
    variances = []
    for c in range(t.num_classes):
        rates = [int(t.counts[g, :, c].sum()) / totals[g] for g in range(t.num_groups)]
        variances.append(_population_variance(rates))
    return sum(variances) / t.num_classes


@dataclass
class FairnessReport:
    """The five metrics plus the per-group/per-class rates behind them.

    Metrics that are undefined for the log (for example the skewed error
    ratio with a single group) are ``None`` and listed in ``absent``.
    """

    num_classes: int
    num_groups: int
    total: int
    acc: float | None
    ser: float | None
    eo: float | None
    ba: float | None
    dp: float | None
    per_group_error: list[float | None]
    recall_by_group_class: list[list[float | None]]
    prediction_rate_by_group_class: list[list[float | None]]
    conventions: dict[str, str] = field(default_factory=lambda: dict(CONVENTIONS))

    @property
    def absent(self) -> list[str]:
        return [name for name in METRIC_NAMES if getattr(self, name) is None]

    def metric(self, name: str) -> float | None:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "num_groups": self.num_groups,
            "total": self.total,
            "acc": self.acc,
            "ser": self.ser,
            "eo": self.eo,
            "ba": self.ba,
            "dp": self.dp,
            "per_group_error": self.per_group_error,
            "recall_by_group_class": self.recall_by_group_class,
            "prediction_rate_by_group_class": self.prediction_rate_by_group_class,
            "absent": self.absent,
            "conventions": self.conventions,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FairnessReport":
        return cls(
            num_classes=payload["num_classes"],
            num_groups=payload["num_groups"],
            total=payload["total"],
            acc=payload["acc"],
            ser=payload["ser"],
            eo=payload["eo"],
            ba=payload["ba"],
            dp=payload["dp"],
            per_group_error=payload["per_group_error"],
            recall_by_group_class=payload["recall_by_group_class"],
            prediction_rate_by_group_class=payload["prediction_rate_by_group_class"],
            conventions=dict(payload.get("conventions", CONVENTIONS)),
        )


def full_report(
    records: Sequence[PredictionRecord], num_classes: int, num_groups: int
) -> FairnessReport:
    """Compute all five metrics; degenerate ones come back absent, not as errors."""
    if not records:
        raise UndefinedMetricError("cannot build a report from an empty prediction log")
    t = tally(records, num_classes, num_groups)
    totals = _group_totals(t)

    def attempt(fn):
        try:
            return fn(t)
        except UndefinedMetricError:
            return None

    per_group_error: list[float | None] = []
    for g in range(num_groups):
        if totals[g] == 0:
            per_group_error.append(None)
        else:
            correct_g = sum(int(t.counts[g, c, c]) for c in range(num_classes))
            per_group_error.append(1.0 - correct_g / totals[g])

    recall: list[list[float | None]] = []
    pred_rate: list[list[float | None]] = []
    for g in range(num_groups):
        recall_row: list[float | None] = []
        rate_row: list[float | None] = []
        for c in range(num_classes):
            gt = int(t.counts[g, c, :].sum())
            recall_row.append(int(t.counts[g, c, c]) / gt if gt > 0 else None)
            rate_row.append(int(t.counts[g, :, c].sum()) / totals[g] if totals[g] > 0 else None)
        recall.append(recall_row)
        pred_rate.append(rate_row)

    # A lone group has no cross-group ratio to report, even though the
    # raw max/min collapses to 1.0 there.
    ser = attempt(skewed_error_ratio) if num_groups >= 2 else None

    return FairnessReport(
        num_classes=num_classes,
        num_groups=num_groups,
        total=t.total,
        acc=accuracy(t),
        ser=ser,
        eo=attempt(equal_opportunity),
        ba=attempt(bias_amplification),
        dp=attempt(demographic_parity),
        per_group_error=per_group_error,
        recall_by_group_class=recall,
        prediction_rate_by_group_class=pred_rate,
    )


def mean_reports(reports: Sequence[FairnessReport]) -> FairnessReport:
    """Elementwise mean of reports sharing one test set (the local-only
    baseline averages each client's metrics). A metric is present in the
    mean only when present in every report."""
    if not reports:
        raise ValueError("need at least one report to average")
    first = reports[0]
    for r in reports[1:]:
        if (r.num_classes, r.num_groups, r.total) != (
            first.num_classes,
            first.num_groups,
            first.total,
        ):
            raise ValueError("reports to average must describe the same test set")

    def mean_scalar(values: list[float | None]) -> float | None:
        if any(v is None for v in values):
            return None
        return sum(values) / len(values)

    def mean_matrix(mats: list[list[list[float | None]]]) -> list[list[float | None]]:
        out = []
        for g in range(first.num_groups):
            row = []
            for c in range(first.num_classes):
                row.append(mean_scalar([m[g][c] for m in mats]))
            out.append(row)
        return out

    return FairnessReport(
        num_classes=first.num_classes,
        num_groups=first.num_groups,
        total=first.total,
        acc=mean_scalar([r.acc for r in reports]),
        ser=mean_scalar([r.ser for r in reports]),
        eo=mean_scalar([r.eo for r in reports]),
        ba=mean_scalar([r.ba for r in reports]),
        dp=mean_scalar([r.dp for r in reports]),
        per_group_error=[
            mean_scalar([r.per_group_error[g] for r in reports])
            for g in range(first.num_groups)
        ],
        recall_by_group_class=mean_matrix([r.recall_by_group_class for r in reports]),
        prediction_rate_by_group_class=mean_matrix(
            [r.prediction_rate_by_group_class for r in reports]
        ),
    )


def load_prediction_log(path: str | Path) -> list[PredictionRecord]:
    """Read a ``predicted,actual,group`` CSV; malformed rows name their line."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file, expected a header row")
    if [c.strip() for c in lines[0].split(",")] != ["predicted", "actual", "group"]:
        raise DataFormatError(f"{path}: line 1: header must be 'predicted,actual,group'")
    records = []
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        cells = line.split(",")
        if len(cells) != 3:
            raise DataFormatError(f"{path}: line {lineno}: expected 3 columns, found {len(cells)}")
        try:
            records.append(PredictionRecord(int(cells[0]), int(cells[1]), int(cells[2])))
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: {exc}") from None
    return records
