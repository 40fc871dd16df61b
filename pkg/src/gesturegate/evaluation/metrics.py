"""Confusion matrices and macro F1."""

from __future__ import annotations

import numpy as np

from gesturegate import N_CLASSES
from gesturegate.errors import DataError


def confusion(true, pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise DataError(f"label sequences differ in length: {true.size} vs {pred.size}")
    for arr in (true, pred):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise DataError(f"labels outside 0..{n_classes - 1}")
    return np.bincount(true * n_classes + pred, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def per_class_f1(m: np.ndarray) -> np.ndarray:
    """F1 per class; NaN for classes with neither true nor predicted instances."""
    m = np.asarray(m, dtype=np.float64)
    tp = np.diag(m)
    support = m.sum(axis=1)
    predicted = m.sum(axis=0)
    f1 = np.full(len(m), np.nan)
    present = (support + predicted) > 0
    # 2PR/(P+R) == 2TP/(support+predicted)
    f1[present] = 2 * tp[present] / (support[present] + predicted[present])
    return f1


def macro_f1(m: np.ndarray) -> float:
    f1 = per_class_f1(m)
    if np.all(np.isnan(f1)):
        return 0.0
    return float(np.nanmean(f1))
