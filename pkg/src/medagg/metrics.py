"""Selection metrics and replicate aggregation for benchmark tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput
from .simulation import SimTruth
from .solver import FitResult


@dataclass(frozen=True)
class SelectionCounts:
    """Confusion counts pooled over the entries of (a, b)."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    empty_selection: bool = False


@dataclass(frozen=True)
class BenchmarkRow:
    """One condition's summary in the benchmark table layout."""

    condition: str
    n_replicates: int
    mp_mean: float
    mp_sd: float
    abs_bias: float
    precision: float
    recall: float
    f1: float
    accuracy: float
    small_sample: bool = False
    n_failed: int = 0


def selection_counts(fit: FitResult, truth: SimTruth) -> SelectionCounts:
    """Pooled TP/FP/TN/FN of the exactly-nonzero entries of (a, b)."""
    a_hat = np.asarray(fit.weights.a)
    b_hat = np.asarray(fit.weights.b)
    a_true = np.asarray(truth.a_true)
    b_true = np.asarray(truth.b_true)
    if a_hat.shape != a_true.shape or b_hat.shape != b_true.shape:
        raise DimensionMismatch("fitted and true weight dimensions differ")
    sel = np.concatenate([a_hat != 0.0, b_hat != 0.0])
    tru = np.concatenate([a_true != 0.0, b_true != 0.0])
    tp = int(np.sum(sel & tru))
    fp = int(np.sum(sel & ~tru))
    fn = int(np.sum(~sel & tru))
    tn = int(np.sum(~sel & ~tru))
    return SelectionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def classification_metrics(c: SelectionCounts) -> ClassificationMetrics:
    """Precision/recall/F1/accuracy with zero-denominator conventions.

    Empty selections (tp = fp = 0) report precision = recall = f1 = 0 with
    a flag; accuracy is always (tp + tn) / total.
    """
    empty = (c.tp + c.fp) == 0
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    accuracy = (c.tp + c.tn) / c.total if c.total > 0 else 0.0
    return ClassificationMetrics(
        precision=precision, recall=recall, f1=f1, accuracy=accuracy,
        empty_selection=empty,
    )


def aggregate_replicates(
    fits: list[tuple[FitResult, SimTruth]],
    condition: str = "",
    n_failed: int = 0,
) -> BenchmarkRow:
    """Mean/SD of the estimated MP and mean selection metrics over replicates."""
    if not fits:
        raise EmptyInput("no replicates to aggregate")
    mps = np.array([f.coefficients.mp_hat for f, _ in fits])
    mp_true = fits[0][1].mp_true
    rows = [classification_metrics(selection_counts(f, t)) for f, t in fits]
    mp_mean = float(np.mean(mps))
    mp_sd = float(np.std(mps, ddof=1)) if len(mps) > 1 else 0.0
    return BenchmarkRow(
        condition=condition,
        n_replicates=len(fits),
        mp_mean=mp_mean,
        mp_sd=mp_sd,
        abs_bias=abs(mp_mean - mp_true) if np.isfinite(mp_true) else float("nan"),
        precision=float(np.mean([r.precision for r in rows])),
        recall=float(np.mean([r.recall for r in rows])),
        f1=float(np.mean([r.f1 for r in rows])),
        accuracy=float(np.mean([r.accuracy for r in rows])),
        small_sample=len(fits) < 2,
        n_failed=n_failed,
    )
