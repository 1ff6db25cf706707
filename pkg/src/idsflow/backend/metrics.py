"""Confusion-matrix metrics, per-class results and one-vs-rest ROC/AUC.

Definitions (reported in every metrics document):
  accuracy        multi-class correct / total
  detection rate  attack recall after attack-vs-normal binarization, TP/(TP+FN)
  precision       TP/(TP+FP) on the same binarization
  FAR             normal records flagged as any attack / all normal records, FP/(FP+TN)
  per-class       one-vs-rest accuracy and class recall (detection rate)
A metric whose denominator is zero is reported as null, never as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateClass, EmptyMatrix, LengthMismatch, OutOfRangeClass

METRIC_DEFINITIONS: dict[str, str] = {
    "accuracy": "multi-class correct predictions / all records",
    "detection_rate": "attack records predicted as any attack class / all attack records",
    "recall": "same as detection_rate",
    "precision": "attack records predicted as attack / all records predicted as attack",
    "f1": "harmonic mean of precision and detection_rate",
    "far": "normal records predicted as any attack class / all normal records",
    "per_class.accuracy": "one-vs-rest accuracy of the class",
    "per_class.detection_rate": "recall of the class",
    "null": "denominator was zero; value undefined",
}


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # counts[i, j]: true class i predicted as j
    normal_class: int

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def k(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.counts.shape != self.counts.shape or other.normal_class != self.normal_class:
            raise LengthMismatch("cannot merge confusion matrices of different shape")
        return ConfusionMatrix(self.counts + other.counts, self.normal_class)

    def to_dict(self) -> dict[str, Any]:
        return {"normal_class": self.normal_class, "counts": self.counts.tolist()}


def confusion(
    y_true: Sequence[int] | np.ndarray,
    y_pred: Sequence[int] | np.ndarray,
    k: int,
    normal_class: int | None = None,
) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise LengthMismatch(f"{t.shape[0]} true labels vs {p.shape[0]} predictions")
    if t.size and (t.min() < 0 or p.min() < 0 or t.max() >= k or p.max() >= k):
        raise OutOfRangeClass(f"class index outside [0, {k})")
    counts = np.bincount(t * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts, k - 1 if normal_class is None else normal_class)


def _ratio(num: float, den: float) -> float | None:
    return float(num) / float(den) if den > 0 else None


def _f1(precision: float | None, recall: float | None) -> float | None:
    if precision is None or recall is None:
        return None
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class OverallMetrics:
    accuracy: float
    detection_rate: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    far: float | None
    tp: int
    fn: int
    fp: int
    tn: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "detection_rate": self.detection_rate,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "far": self.far,
            "binary_counts": {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn},
        }


def overall_metrics(cm: ConfusionMatrix) -> OverallMetrics:
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has no records")
    n = cm.normal_class
    attack = np.ones(cm.k, dtype=bool)
    attack[n] = False
    tp = int(cm.counts[np.ix_(attack, attack)].sum())
    fn = int(cm.counts[attack, n].sum())
    fp = int(cm.counts[n, attack].sum())
    tn = int(cm.counts[n, n])
    dr = _ratio(tp, tp + fn)
    precision = _ratio(tp, tp + fp)
    return OverallMetrics(
        accuracy=float(np.trace(cm.counts)) / total,
        detection_rate=dr,
        precision=precision,
        recall=dr,
        f1=_f1(precision, dr),
        far=_ratio(fp, fp + tn),
        tp=tp, fn=fn, fp=fp, tn=tn,
    )


@dataclass(frozen=True)
class ClassMetrics:
    class_index: int
    support: int
    accuracy: float
    detection_rate: float | None
    precision: float | None
    f1: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "class_index": self.class_index,
            "support": self.support,
            "accuracy": self.accuracy,
            "detection_rate": self.detection_rate,
            "precision": self.precision,
            "f1": self.f1,
        }


def per_class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has no records")
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    out: list[ClassMetrics] = []
    for c in range(cm.k):
        tp = int(cm.counts[c, c])
        fn = int(rows[c]) - tp
        fp = int(cols[c]) - tp
        tn = total - tp - fn - fp
        recall = _ratio(tp, rows[c])
        precision = _ratio(tp, cols[c])
        out.append(
            ClassMetrics(
                class_index=c,
                support=int(rows[c]),
                accuracy=(tp + tn) / total,
                detection_rate=recall,
                precision=precision,
                f1=_f1(precision, recall),
            )
        )
    return out


@dataclass(frozen=True)
class RocCurve:
    class_index: int
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_ovr(scores: np.ndarray, y_true: np.ndarray, c: int) -> RocCurve:
    """One-vs-rest ROC for class `c`; tied scores form a single threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y_true, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{scores.shape[0]} score rows for {y.shape[0]} labels")
    if not 0 <= c < scores.shape[1]:
        raise OutOfRangeClass(f"class {c} outside [0, {scores.shape[1]})")

    positive = y == c
    n_pos = int(positive.sum())
    n_neg = int(y.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass(c, n_pos, n_neg)

    s = scores[:, c]
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    pos_sorted = positive[order]
    tps = np.cumsum(pos_sorted)
    fps = np.cumsum(~pos_sorted)
    ends = np.r_[np.flatnonzero(np.diff(s_sorted)), s_sorted.shape[0] - 1]

    tpr = np.r_[0.0, tps[ends] / n_pos]
    fpr = np.r_[0.0, fps[ends] / n_neg]
    thresholds = np.r_[np.inf, s_sorted[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(class_index=c, fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


@dataclass
class MetricsReport:
    class_names: tuple[str, ...]
    confusion: ConfusionMatrix
    overall: OverallMetrics
    per_class: list[ClassMetrics]
    roc: dict[int, RocCurve] = field(default_factory=dict)
    degenerate: dict[int, str] = field(default_factory=dict)
    protocol: str = "unspecified"
    # raw evaluation outputs, kept for the predictions file; not part of to_dict()
    y_true: np.ndarray | None = None
    probabilities: np.ndarray | None = None

    def to_dict(self) -> dict[str, Any]:
        per_class = []
        for cm in self.per_class:
            entry = cm.to_dict()
            entry["class_name"] = self.class_names[cm.class_index]
            roc = self.roc.get(cm.class_index)
            entry["auc"] = roc.auc if roc is not None else None
            per_class.append(entry)
        return {
            "protocol": self.protocol,
            "definitions": METRIC_DEFINITIONS,
            "class_names": list(self.class_names),
            "overall": self.overall.to_dict(),
            "per_class": per_class,
            "confusion": self.confusion.to_dict(),
            "degenerate_roc_classes": {str(k): v for k, v in sorted(self.degenerate.items())},
        }


def build_report(
    y_true: np.ndarray,
    probabilities: np.ndarray,
    class_names: Sequence[str],
    normal_class: int,
    *,
    protocol: str = "unspecified",
) -> MetricsReport:
    """Argmax predictions, every metric, and a ROC curve per non-degenerate class."""
    k = len(class_names)
    y_pred = np.argmax(probabilities, axis=1)
    cm = confusion(y_true, y_pred, k, normal_class)
    roc: dict[int, RocCurve] = {}
    degenerate: dict[int, str] = {}
    for c in range(k):
        try:
            roc[c] = roc_ovr(probabilities, y_true, c)
        except DegenerateClass as e:
            degenerate[c] = str(e)
    return MetricsReport(
        class_names=tuple(class_names),
        confusion=cm,
        overall=overall_metrics(cm),
        per_class=per_class_metrics(cm),
        roc=roc,
        degenerate=degenerate,
        protocol=protocol,
        y_true=np.asarray(y_true, dtype=np.int64),
        probabilities=probabilities,
    )
