"""Regression and classification metrics: RMSE, Pearson correlation, accuracy, AUC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata


class MetricError(ValueError):
    pass


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise MetricError(f"length mismatch: {pred.size} predictions, {actual.size} actual values")
    if pred.size < 1:
        raise MetricError("need at least one value")
    return pred, actual


def rmse(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def pearson_corr(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    if pred.size < 2:
        raise MetricError("undefined correlation: need at least two values")
    a = pred - pred.mean()
    b = actual - actual.mean()
    saa, sbb = np.dot(a, a), np.dot(b, b)
    if saa == 0 or sbb == 0:
        raise MetricError("undefined correlation: constant vector")
    r = np.dot(a, b) / np.sqrt(saa * sbb)
    return float(np.clip(r, -1.0, 1.0))


def _matrices(pred_dist, actual):
    pred_dist = np.atleast_2d(np.asarray(pred_dist, dtype=float))
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    if pred_dist.shape != actual.shape:
        raise MetricError(f"shape mismatch: {pred_dist.shape} vs {actual.shape}")
    return pred_dist, actual


def accuracy(pred_dist, actual) -> float:
    """Share of rows whose highest-scoring class is the true one (ties go to the lowest index)."""
    pred_dist, actual = _matrices(pred_dist, actual)
    return float(np.mean(np.argmax(pred_dist, axis=1) == np.argmax(actual, axis=1)))


def binary_auc(scores, positive) -> float:
    """Mann-Whitney AUC: P(score of a positive > score of a negative), ties counting 1/2."""
    scores = np.asarray(scores, dtype=float).ravel()
    positive = np.asarray(positive, dtype=bool).ravel()
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both positive and negative examples")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc(pred_dist, actual) -> float:
    """Binary AUC on the class-1 scores, or unweighted macro one-vs-rest AUC for k > 2."""
    pred_dist, actual = _matrices(pred_dist, actual)
    if pred_dist.shape[0] < 2:
        raise MetricError("AUC needs at least two examples")
    truth = np.argmax(actual, axis=1)
    k = pred_dist.shape[1]
    if k == 2:
        return binary_auc(pred_dist[:, 1], truth == 1)
    missing = [j for j in range(k) if not np.any(truth == j)]
    if missing:
        raise MetricError(f"classes {missing} absent from the actual labels")
    return float(np.mean([binary_auc(pred_dist[:, j], truth == j) for j in range(k)]))


def present_class_auc(pred_dist, actual) -> float:
    """Macro AUC over the classes that occur in ``actual``; NaN if fewer than two occur.

    Used on cross-validation folds, where a rare class can be missing from a
    test fold.
    """
    pred_dist, actual = _matrices(pred_dist, actual)
    truth = np.argmax(actual, axis=1)
    present = np.unique(truth)
    if present.size < 2:
        return float("nan")
    if pred_dist.shape[1] == 2:
        return binary_auc(pred_dist[:, 1], truth == 1)
    return float(np.mean([binary_auc(pred_dist[:, j], truth == j) for j in present]))


@dataclass(frozen=True)
class MetricReport:
    task: str
    n_eval: int
    rmse: Optional[float] = None
    corr: Optional[float] = None
    acc: Optional[float] = None
    auc: Optional[float] = None


def evaluate(task: str, pred, actual) -> MetricReport:
    """Metrics for a batch of predictions (``n x m`` matrices, as produced by the forest)."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    if task == "regression":
        p, a = pred[:, 0], actual[:, 0]
        try:
            corr = pearson_corr(p, a)
        except MetricError:
            corr = float("nan")
        return MetricReport(task, p.size, rmse=rmse(p, a), corr=corr)
    return MetricReport(
        task, pred.shape[0], acc=accuracy(pred, actual), auc=present_class_auc(pred, actual)
    )
