"""Classification metrics: confusion matrix, accuracy, macro-averaged F1.

Macro-F1 is the unweighted mean over all classes of the per-class F1. A
class absent from both the predictions and the truth contributes F1 = 0.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidLabelError


def confusion_matrix(truth, predictions, num_classes: int) -> np.ndarray:
    """Integer matrix [num_classes, num_classes]; rows are truth, columns predictions."""
    truth = np.asarray(truth, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if truth.shape != predictions.shape:
        raise InvalidLabelError(f"truth {truth.shape} and predictions {predictions.shape} differ")
    for arr, what in ((truth, "truth"), (predictions, "prediction")):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise InvalidLabelError(f"{what} label outside [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (truth, predictions), 1)
    return cm


def accuracy_from_confusion(cm: np.ndarray) -> float:
    total = int(cm.sum())
    return float(np.trace(cm)) / total if total else 0.0


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(np.float64)
    col = cm.sum(axis=0).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    pr = precision + recall
    return np.divide(2.0 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)


def macro_f1_from_confusion(cm: np.ndarray) -> float:
    return float(per_class_f1(cm).mean())


def classification_metrics(truth, predictions, num_classes: int) -> dict:
    cm = confusion_matrix(truth, predictions, num_classes)
    return {
        "accuracy": accuracy_from_confusion(cm),
        "macro_f1": macro_f1_from_confusion(cm),
        "confusion": cm,
    }
