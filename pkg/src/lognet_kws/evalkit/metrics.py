"""Multiclass classification metrics from a confusion matrix."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..lognet import DEFAULT_LABELS


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


def confusion_matrix(y_true, y_pred, labels=DEFAULT_LABELS) -> np.ndarray:
    """Counts with true classes on rows and predictions on columns."""
    index = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        try:
            cm[index[t], index[p]] += 1
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} outside {tuple(labels)}") from None
    return cm


def multiclass_mcc(cm: np.ndarray) -> float:
    """Covariance (Gorodkin) form of the Matthews correlation coefficient."""
    cm = np.asarray(cm, dtype=np.float64)
    s = cm.sum()
    c = np.trace(cm)
    t = cm.sum(axis=1)
    p = cm.sum(axis=0)
    num = c * s - t @ p
    den = np.sqrt((s * s - p @ p) * (s * s - t @ t))
    return float(num / den) if den > 0 else 0.0


@dataclass
class EvalReport:
    labels: list
    confusion: list
    accuracy: float
    balanced_accuracy: float
    mcc: float
    precision: list
    recall: list
    f1: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    n_samples: int
    fallback_count: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.labels])
        for lab, row in zip(self.labels, self.confusion):
            w.writerow([lab, *row])
        return buf.getvalue()

    def per_class_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1"])
        for row in zip(self.labels, self.precision, self.recall, self.f1):
            w.writerow([row[0], *(f"{v:.6f}" for v in row[1:])])
        w.writerow(["macro", f"{self.macro_precision:.6f}", f"{self.macro_recall:.6f}",
                    f"{self.macro_f1:.6f}"])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'class':<8}{'precision':>11}{'recall':>9}{'f1':>9}"]
        for lab, p, r, f in zip(self.labels, self.precision, self.recall, self.f1):
            lines.append(f"{lab:<8}{p:>11.4f}{r:>9.4f}{f:>9.4f}")
        lines.append(f"{'macro':<8}{self.macro_precision:>11.4f}{self.macro_recall:>9.4f}"
                     f"{self.macro_f1:>9.4f}")
        lines.append(f"accuracy {self.accuracy:.4f}  balanced {self.balanced_accuracy:.4f}  "
                     f"MCC {self.mcc:.4f}  n={self.n_samples}  vad-fallbacks={self.fallback_count}")
        return "\n".join(lines)


def report_from_confusion(cm, labels=DEFAULT_LABELS, fallback_count=0) -> EvalReport:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("cannot compute metrics on an empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    precision = _safe_div(tp, cm.sum(axis=0))
    recall = _safe_div(tp, cm.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    # balanced accuracy averages recall over classes present in the truth
    present = cm.sum(axis=1) > 0
    return EvalReport(
        labels=list(labels),
        confusion=cm.tolist(),
        accuracy=float(tp.sum() / total),
        balanced_accuracy=float(recall[present].mean()),
        mcc=multiclass_mcc(cm),
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        n_samples=total,
        fallback_count=int(fallback_count),
    )


def compute_metrics(y_true, y_pred, labels=DEFAULT_LABELS, fallback_count=0) -> EvalReport:
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted labels")
    if not y_true:
        raise ValueError("compute_metrics needs at least one label")
    return report_from_confusion(confusion_matrix(y_true, y_pred, labels), labels, fallback_count)
