"""Accuracy and ROC-AUC."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError, UndefinedMetricError

THRESHOLD = 0.5


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    roc_auc: float | None
    n_test: int
    class_balance: float

    def to_dict(self) -> dict:
        return asdict(self)


def _binary(y, name: str) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ShapeError(f"{name} must contain only 0/1")
    return y.astype(np.int8)


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = _binary(y_true, "y_true"), _binary(y_pred, "y_pred")
    if y_true.size == 0:
        raise ShapeError("accuracy of an empty sample is undefined")
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    return int((y_true == y_pred).sum()) / y_true.size


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney statistic: P(score of random positive > random negative), ties count 1/2.

    Integer tallies keep the result exactly equal to pairwise counting.
    """
    y = _binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise ShapeError(f"length mismatch: {y.size} labels vs {s.size} scores")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both classes in y_true")
    if np.isnan(s).any():
        raise ShapeError("scores contain NaN")
    order = np.argsort(s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    # tie groups: [starts[k], starts[k+1])
    starts = np.flatnonzero(np.r_[True, s_sorted[1:] != s_sorted[:-1]])
    pos_in_group = np.add.reduceat(y_sorted.astype(np.int64), starts)
    size = np.diff(np.r_[starts, y.size])
    neg_in_group = size - pos_in_group
    neg_below = np.concatenate(([0], np.cumsum(neg_in_group)[:-1]))
    twice_u = int((2 * pos_in_group * neg_below + pos_in_group * neg_in_group).sum())
    return twice_u / (2 * n_pos * n_neg)


def evaluate(y_true, proba) -> EvalReport:
    y = _binary(y_true, "y_true")
    p = np.asarray(proba, dtype=np.float64)
    pred = (p >= THRESHOLD).astype(np.int8)
    try:
        auc = roc_auc(y, p)
    except UndefinedMetricError:
        auc = None
    return EvalReport(accuracy(y, pred), auc, int(y.size), float(y.mean()))
