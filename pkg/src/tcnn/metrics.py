"""Classification metrics: accuracy, macro precision/recall/F1, macro
one-vs-rest ROC AUC, confusion matrix.

Multiclass scalars are macro averages: per-class scores with 0/0 defined
as 0, averaged uniformly over classes. AUC uses the rank (Mann-Whitney)
formulation with midpoint ranks on ties, which equals the trapezoidal area
under the ROC curve with the tie-midpoint convention; classes lacking
either a positive or a negative example are skipped, and if every class
lacks one the AUC is reported as absent (None).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class MetricsReport:
    accuracy: float
    auc: float | None
    f1: float
    precision: float
    recall: float
    confusion: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "accuracy": self.accuracy,
            "auc": self.auc,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": self.confusion.tolist(),
        }, sort_keys=True)

    def to_csv(self) -> str:
        auc = "" if self.auc is None else repr(self.auc)
        return ("accuracy,auc,f1,precision,recall\n"
                f"{self.accuracy!r},{auc},{self.f1!r},{self.precision!r},{self.recall!r}\n")


def _as_labels(a, name) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {a.shape}")
    return a.astype(np.int64)


def accuracy(pred_labels, true_labels) -> float:
    pred = _as_labels(pred_labels, "pred_labels")
    true = _as_labels(true_labels, "true_labels")
    if pred.shape != true.shape:
        raise ShapeError("prediction/label length mismatch")
    return float((pred == true).mean())


def confusion_matrix(pred_labels, true_labels, num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    pred = _as_labels(pred_labels, "pred_labels")
    true = _as_labels(true_labels, "true_labels")
    mat = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(mat, (true, pred), 1)
    return mat


def macro_prf(pred_labels, true_labels, num_classes: int) -> tuple[float, float, float]:
    """Macro precision, recall, F1 with 0/0 -> 0 per class."""
    mat = confusion_matrix(pred_labels, true_labels, num_classes)
    tp = np.diag(mat).astype(np.float64)
    predicted = mat.sum(axis=0).astype(np.float64)
    support = mat.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(predicted > 0, tp / predicted, 0.0)
        rec = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    return float(prec.mean()), float(rec.mean()), float(f1.mean())


def _binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Rank-based AUC with midpoint tie ranks."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    rank_base = 1.0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = rank_base + (j - i) / 2.0
        rank_base += j - i + 1
        i = j + 1
    n_pos = int(positives.sum())
    n_neg = len(scores) - n_pos
    rank_sum = ranks[positives].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc_macro_ovr(scores, true_labels) -> float | None:
    """Macro one-vs-rest ROC AUC over classes with both outcomes present."""
    scores = np.asarray(scores, dtype=np.float64)
    true = _as_labels(true_labels, "true_labels")
    if scores.ndim != 2 or scores.shape[0] != true.shape[0]:
        raise ShapeError(f"scores shape {scores.shape} incompatible with labels")
    aucs = []
    for c in range(scores.shape[1]):
        positives = true == c
        n_pos = int(positives.sum())
        if n_pos == 0 or n_pos == len(true):
            continue
        aucs.append(_binary_auc(scores[:, c], positives))
    if not aucs:
        return None
    return float(np.mean(aucs))


def report(scores, pred_labels, true_labels, num_classes: int) -> MetricsReport:
    prec, rec, f1 = macro_prf(pred_labels, true_labels, num_classes)
    return MetricsReport(
        accuracy=accuracy(pred_labels, true_labels),
        auc=roc_auc_macro_ovr(scores, true_labels),
        f1=f1,
        precision=prec,
        recall=rec,
        confusion=confusion_matrix(pred_labels, true_labels, num_classes),
    )
