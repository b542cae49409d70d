"""Correlation coefficients and log-log slope fitting."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateSeries, LengthMismatch, NonPositiveInput


def _paired(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"series have lengths {x.size} and {y.size}")
    if x.size < 3:
        raise DegenerateSeries(f"need at least 3 pairs, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("series must be finite")
    return x, y


def _pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    sx, sy = np.max(np.abs(xc)), np.max(np.abs(yc))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateSeries("a series has zero variance")
    # rescaling keeps the sums of squares away from overflow and underflow
    xc, yc = xc / sx, yc / sy
    # one square root of the product keeps r == +-1 exact for identical
    # (or mirrored) centred series
    r = np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    return float(np.clip(r, -1.0, 1.0))


def pearson(x, y) -> float:
    """Product-moment correlation of two paired series."""
    return _pearson(*_paired(x, y))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    values = np.asarray(values, dtype=np.float64).ravel()
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(values.size)
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], values.size]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def spearman(x, y) -> float:
    """Spearman's rho as the Pearson correlation of average ranks."""
    x, y = _paired(x, y)
    return _pearson(average_ranks(x), average_ranks(y))


def loglog_slope(points):
    """Least-squares ``(slope, intercept)`` of ``log(error)`` against ``log(L)``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (L, error) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise NonPositiveInput("L and error values must be positive and finite")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    xc = lx - lx.mean()
    denom = np.dot(xc, xc)
    if denom == 0.0:
        raise DegenerateSeries("all L values are equal")
    slope = np.dot(xc, ly - ly.mean()) / denom
    return float(slope), float(ly.mean() - slope * lx.mean())
