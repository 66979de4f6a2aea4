"""Correlation and error metrics used throughout model evaluation."""

import numpy as np
from scipy.stats import rankdata


def _pair(x, y, min_len=3):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {x.size}")
    return x, y


def pearson(x, y):
    """Pearson linear correlation; raises on a constant vector."""
    x, y = _pair(x, y, 2)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("correlation is undefined for a constant vector")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def srcc(x, y):
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x, y = _pair(x, y)
    return pearson(rankdata(x), rankdata(y))


def plcc(x, y):
    x, y = _pair(x, y)
    return pearson(x, y)


def rmse(x, y):
    x, y = _pair(x, y, 1)
    return float(np.sqrt(np.mean((x - y) ** 2)))
