"""Confusion counts, per-class precision/recall/F1, accuracy and ROC AUC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEvaluation, LengthMismatch, NonBinaryValue, SingleClassLabels


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def flipped(self) -> "ConfusionCounts":
        """Same predictions with class 0 treated as the positive class."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: tuple[float, float]
    recall: tuple[float, float]
    f1: tuple[float, float]
    auc: float | None = None
    degenerate: frozenset[str] = field(default_factory=frozenset)

    @property
    def sensitivity(self) -> float:
        return self.recall[1]


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise NonBinaryValue(f"{name} contains values other than 0/1")
    return arr.astype(np.int64)


def confusion(preds, labels) -> ConfusionCounts:
    p = _binary(preds, "preds")
    t = _binary(labels, "labels")
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} predictions for {t.size} labels")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (t == 1))),
        fp=int(np.sum((p == 1) & (t == 0))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def _ratio(num: int, den: int, flag: str, flags: set) -> float:
    if den == 0:
        flags.add(flag)
        return 0.0
    return num / den


def _positive_class(c: ConfusionCounts, cls: int, flags: set) -> tuple[float, float, float]:
    precision = _ratio(c.tp, c.tp + c.fp, f"precision{cls}", flags)
    recall = _ratio(c.tp, c.tp + c.fn, f"recall{cls}", flags)
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, f"f1_{cls}", flags)
    return precision, recall, f1


def metrics(counts: ConfusionCounts, auc_value: float | None = None) -> MetricReport:
    """Accuracy plus precision/recall/F1 for class 1 and (label-flipped) class 0.

    Zero denominators give 0 and are named in ``degenerate``.
    """
    if counts.total == 0:
        raise EmptyEvaluation("no evaluated windows")
    flags: set[str] = set()
    p1, r1, f1 = _positive_class(counts, 1, flags)
    p0, r0, f0 = _positive_class(counts.flipped(), 0, flags)
    return MetricReport(
        accuracy=(counts.tp + counts.tn) / counts.total,
        precision=(p0, p1),
        recall=(r0, r1),
        f1=(f0, f1),
        auc=auc_value,
        degenerate=frozenset(flags),
    )


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) over every distinct score threshold, starting at (0, 0)."""
    s = np.asarray(scores, dtype=np.float64)
    t = _binary(labels, "labels")
    if s.shape != t.shape:
        raise LengthMismatch(f"{s.size} scores for {t.size} labels")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("AUC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    # last index of each run of equal scores
    cut = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tps = np.cumsum(t)[cut]
    fps = (cut + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    return fpr, tpr


def auc(scores, labels) -> float:
    """Trapezoidal area under the ROC; tied scores contribute half credit."""
    fpr, tpr = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def evaluate(preds, labels, scores=None) -> MetricReport:
    counts = confusion(preds, labels)
    value = auc(scores, labels) if scores is not None else None
    return metrics(counts, value)
