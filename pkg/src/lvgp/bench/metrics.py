"""Accuracy and interval-quality metrics."""

from __future__ import annotations

import numpy as np


def rrmse(y, yhat) -> float:
    """Root mean squared error relative to the spread of ``y`` (1 for the mean predictor)."""
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ValueError("y and yhat must have the same length")
    if y.size < 2:
        raise ValueError("at least two observations are required")
    ss = np.sum((y - y.mean()) ** 2)
    if ss <= 0:
        raise ValueError("rrmse is undefined for a constant response")
    return float(np.sqrt(np.sum((y - yhat) ** 2) / ss))


def interval_score(y, lower, upper, level: float = 0.95):
    """Width plus ``2 / (1 - level)`` times the miss distance; vectorized over points."""
    y, lower, upper = (np.asarray(a, dtype=float) for a in (y, lower, upper))
    if np.any(lower > upper):
        raise ValueError("interval lower bound exceeds upper bound")
    a = 1.0 - level
    score = (upper - lower) + (2.0 / a) * np.maximum(lower - y, 0.0) + (2.0 / a) * np.maximum(y - upper, 0.0)
    return float(score) if score.ndim == 0 else score


def mis(y, intervals, level: float = 0.95) -> float:
    """Mean interval score over points; ``intervals`` is ``(n, 2)``."""
    iv = np.asarray(intervals, dtype=float)
    return float(np.mean(interval_score(np.asarray(y, dtype=float), iv[:, 0], iv[:, 1], level)))


def coverage(y, intervals) -> float:
    """Fraction of points inside their closed interval."""
    y = np.asarray(y, dtype=float)
    iv = np.asarray(intervals, dtype=float)
    return float(np.mean((y >= iv[:, 0]) & (y <= iv[:, 1])))
