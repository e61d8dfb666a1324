"""Confusion matrices, per-class precision/recall/F1, and report assembly.

Zero-denominator convention: a class with no predicted rows gets precision 0,
a class with no true rows gets recall 0 and F1 0, and such classes still count
toward the macro average. Rows of the confusion matrix are ground truth,
columns are predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import LabelOutOfRangeError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray                 # K x K, int64, rows = truth
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if counts.shape[0] != len(self.class_names):
            raise ValueError("class_names length must match matrix size")
        if (counts < 0).any():
            raise ValueError("confusion counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        """CSV export: header row of predicted class names, one row per true class."""
        lines = ["truth\\pred," + ",".join(self.class_names)]
        for i, name in enumerate(self.class_names):
            lines.append(name + "," + ",".join(str(int(v)) for v in self.counts[i]))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_f1: float
    weighted_f1: float
    accuracy: float

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.confusion.class_names

    def to_dict(self) -> dict:
        return {
            "classes": list(self.class_names),
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
            "f1": [float(v) for v in self.f1],
            "support": [int(v) for v in self.support],
            "macro_f1": float(self.macro_f1),
            "weighted_f1": float(self.weighted_f1),
            "accuracy": float(self.accuracy),
            "confusion": [[int(v) for v in row] for row in self.confusion.counts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        d = json.loads(text)
        cm = ConfusionMatrix(np.array(d["confusion"], dtype=np.int64), tuple(d["classes"]))
        return cls(
            confusion=cm,
            precision=np.array(d["precision"], dtype=np.float64),
            recall=np.array(d["recall"], dtype=np.float64),
            f1=np.array(d["f1"], dtype=np.float64),
            support=np.array(d["support"], dtype=np.int64),
            macro_f1=float(d["macro_f1"]),
            weighted_f1=float(d["weighted_f1"]),
            accuracy=float(d["accuracy"]),
        )


def confusion(truth, pred, k: int, class_names: tuple[str, ...] | None = None) -> ConfusionMatrix:
    """Tally a K x K confusion matrix; entry [i][j] counts truth i predicted j."""
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError("truth and pred must have equal length")
    if truth.size and (truth.min() < 0 or truth.max() >= k):
        raise LabelOutOfRangeError(f"truth labels outside [0,{k})")
    if pred.size and (pred.min() < 0 or pred.max() >= k):
        raise LabelOutOfRangeError(f"predicted labels outside [0,{k})")
    counts = np.bincount(truth * k + pred, minlength=k * k).reshape(k, k)
    if class_names is None:
        class_names = tuple(str(i) for i in range(k))
    return ConfusionMatrix(counts.astype(np.int64), tuple(class_names))


def class_scores(cm: ConfusionMatrix):
    """Per-class (precision, recall, f1, support) arrays from a confusion matrix."""
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    pred_totals = counts.sum(axis=0)
    support = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_totals > 0, diag / pred_totals, 0.0)
        recall = np.where(support > 0, diag / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    return precision, recall, f1, support.astype(np.int64)


def aggregate(precision, recall, f1, support) -> tuple[float, float, float]:
    """(macro_f1, weighted_f1, accuracy) from per-class scores.

    Accuracy equals the support-weighted mean of per-class recall, which is
    trace/total on the underlying confusion matrix.
    """
    support = np.asarray(support, dtype=np.float64)
    if len(support) == 0:
        raise ValueError("need at least one class")
    total = support.sum()
    macro = float(np.mean(f1))
    if total > 0:
        weighted = float(np.sum(support * f1) / total)
        accuracy = float(np.sum(support * recall) / total)
    else:
        weighted = 0.0
        accuracy = 0.0
    return macro, weighted, accuracy


def build_report(truth, pred, k: int, class_names: tuple[str, ...] | None = None) -> EvaluationReport:
    cm = confusion(truth, pred, k, class_names)
    precision, recall, f1, support = class_scores(cm)
    macro, weighted, accuracy = aggregate(precision, recall, f1, support)
    return EvaluationReport(cm, precision, recall, f1, support, macro, weighted, accuracy)


def render_text(report: EvaluationReport) -> str:
    """Aligned human-readable score table; deterministic formatting."""
    names = report.class_names
    width = max([len(n) for n in names] + [len("weighted avg")])
    lines = [f"{'class':<{width}}  precision  recall     f1         support"]
    for i, name in enumerate(names):
        lines.append(
            f"{name:<{width}}  {report.precision[i]:<9.4f}  {report.recall[i]:<9.4f}  "
            f"{report.f1[i]:<9.4f}  {int(report.support[i])}"
        )
    lines.append("")
    lines.append(f"{'accuracy':<{width}}  {report.accuracy:.4f}")
    lines.append(f"{'macro f1':<{width}}  {report.macro_f1:.4f}")
    lines.append(f"{'weighted f1':<{width}}  {report.weighted_f1:.4f}")
    return "\n".join(lines) + "\n"


def render_csv(report: EvaluationReport) -> str:
    """Per-class scores as CSV plus summary rows; schema documented in README."""
    lines = ["class,precision,recall,f1,support"]
    for i, name in enumerate(report.class_names):
        lines.append(
            f"{name},{report.precision[i]:.12g},{report.recall[i]:.12g},"
            f"{report.f1[i]:.12g},{int(report.support[i])}"
        )
    lines.append(f"__accuracy__,{report.accuracy:.12g},,,")
    lines.append(f"__macro_f1__,{report.macro_f1:.12g},,,")
    lines.append(f"__weighted_f1__,{report.weighted_f1:.12g},,,")
    return "\n".join(lines) + "\n"
