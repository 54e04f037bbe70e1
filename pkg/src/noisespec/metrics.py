"""Evaluation metrics: regression (MSE/MAE/R2) and 3-class classification
(accuracy, per-class precision/recall/F1, macro averages, confusion matrix).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class RegressionReport:
    mse: float
    mae: float
    r2: Optional[float]     # None when Var(y_true) = 0 (undefined)
    residuals: np.ndarray

    def rows(self):
        r2 = "undefined" if self.r2 is None else repr(self.r2)
        return [("mse", repr(self.mse)), ("mae", repr(self.mae)), ("r2", r2)]


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: np.ndarray          # per class
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray          # raw counts, confusion[i, j] = (true i, pred j)
    confusion_normalized: np.ndarray
    zero_prediction_classes: tuple  # classes flagged precision=0 for 0 predictions


def regression_metrics(y_true, y_pred) -> RegressionReport:
    """MSE, MAE and R2 = 1 - SS_res/SS_tot; R2 is undefined (None) for
    zero-variance truth."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size < 2:
        raise ValueError("y_true and y_pred must be equal-length 1-D, n >= 2")
    residuals = y_pred - y_true
    mse = float(np.mean(residuals ** 2))
    mae = float(np.mean(np.abs(residuals)))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - float(np.sum(residuals ** 2)) / ss_tot
    return RegressionReport(mse=mse, mae=mae, r2=r2, residuals=residuals)


def classification_metrics(y_true, y_pred, n_classes: int = 3) -> ClassificationReport:
    """Per-class precision/recall/F1 with unweighted macro averages.

    A class that is never predicted gets precision 0 (flagged, not NaN);
    row-normalization of the confusion matrix skips empty true classes.
    """
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be equal-length 1-D")
    labels = np.concatenate([y_true, y_pred])
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes - 1}]")
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (y_true, y_pred), 1)
    tp = np.diag(confusion).astype(float)
    pred_pos = confusion.sum(axis=0).astype(float)
    true_pos = confusion.sum(axis=1).astype(float)

    flagged = tuple(int(c) for c in np.flatnonzero(pred_pos == 0))
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_pos > 0, tp / np.maximum(pred_pos, 1), 0.0)
        recall = np.where(true_pos > 0, tp / np.maximum(true_pos, 1), 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.maximum(pr, 1e-300), 0.0)
    norm = confusion.astype(float)
    nonzero = true_pos > 0
    norm[nonzero] = norm[nonzero] / true_pos[nonzero, None]
    return ClassificationReport(
        accuracy=float(tp.sum() / y_true.size),
        precision=precision, recall=recall, f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        confusion=confusion, confusion_normalized=norm,
        zero_prediction_classes=flagged)
