"""Exact one-dimensional Wasserstein-p via inverse CDFs.

For two discrete measures the quantile functions are step functions; the
integral of ``|F^-1(z) - G^-1(z)|^p`` over ``[0, 1]`` is computed exactly by
sweeping the union of their cumulative-weight breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidOrder, LengthMismatch, MassMismatch

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SortedWeightedSamples:
    """Atoms sorted ascending with positive weights summing to one."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if pos.size == 0:
            raise ValueError("empty measure")
        if pos.shape != w.shape:
            raise LengthMismatch(f"{pos.size} positions but {w.size} weights")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if np.any(np.diff(pos) < 0):
            raise ValueError("positions must be ascending")
        if not np.all(w > 0):
            raise ValueError("weights must be positive")
        total = w.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise MassMismatch(f"weights sum to {total!r}, expected 1")
        w = w / total
        for arr in (pos, w):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, values, weights=None) -> "SortedWeightedSamples":
        values = np.asarray(values, dtype=np.float64).ravel()
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if weights.shape != values.shape:
            raise LengthMismatch(f"{values.size} values but {weights.size} weights")
        order = np.argsort(values, kind="stable")
        return cls(values[order], weights[order])

    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        return cum


def _check_order(p):
    if not p >= 1:
        raise InvalidOrder(f"p must be >= 1, got {p}")


def _cost(diff, p):
    return np.abs(diff) ** p


def w1d_pp(a: SortedWeightedSamples, b: SortedWeightedSamples, p: float = 2.0) -> float:
    """``W_p^p`` between two weighted discrete measures on the line."""
    _check_order(p)
    cum_a, cum_b = a.cumulative(), b.cumulative()
    breaks = np.union1d(cum_a, cum_b)
    ia = np.minimum(np.searchsorted(cum_a, breaks, side="left"), cum_a.size - 1)
    ib = np.minimum(np.searchsorted(cum_b, breaks, side="left"), cum_b.size - 1)
    mass = np.diff(breaks, prepend=0.0)
    return float(np.sum(mass * _cost(a.positions[ia] - b.positions[ib], p)))


@lru_cache(maxsize=64)
def uniform_merge_plan(n: int, m: int):
    """Segments of the quantile sweep between uniform n- and m-atom measures.

    Breakpoints ``i/n`` and ``j/m`` are compared as integers over the common
    denominator ``n*m``, so coinciding breakpoints are detected exactly.
    Returns ``(index_a, index_b, mass)`` with one entry per segment.
    """
    if n < 1 or m < 1:
        raise ValueError("both measures need at least one atom")
    breaks = np.union1d(np.arange(1, n + 1, dtype=np.int64) * m, np.arange(1, m + 1, dtype=np.int64) * n)
    ia = (breaks - 1) // m
    ib = (breaks - 1) // n
    mass = np.diff(breaks, prepend=0) / float(n * m)
    for arr in (ia, ib, mass):
        arr.setflags(write=False)
    return ia, ib, mass


def w1d_uniform_pp(a_sorted, b_sorted, p: float = 2.0):
    """``W_p^p`` between uniform empirical measures given as sorted atoms.

    Sizes may differ.  Leading axes broadcast: ``a_sorted`` of shape
    ``(..., n)`` and ``b_sorted`` of shape ``(..., m)`` give one value per
    leading index.
    """
    _check_order(p)
    a_sorted = np.asarray(a_sorted, dtype=np.float64)
    b_sorted = np.asarray(b_sorted, dtype=np.float64)
    ia, ib, mass = uniform_merge_plan(a_sorted.shape[-1], b_sorted.shape[-1])
    diff = a_sorted[..., ia] - b_sorted[..., ib]
    out = np.sum(_cost(diff, p) * mass, axis=-1)
    return float(out) if out.ndim == 0 else out


def w1d_equal_uniform_pp(a_sorted, b_sorted, p: float = 2.0) -> float:
    """``(1/n) sum_i |a_i - b_i|^p`` for two sorted samples of equal size."""
    _check_order(p)
    a_sorted = np.asarray(a_sorted, dtype=np.float64).ravel()
    b_sorted = np.asarray(b_sorted, dtype=np.float64).ravel()
    if a_sorted.size != b_sorted.size:
        raise LengthMismatch(f"sizes differ: {a_sorted.size} vs {b_sorted.size}")
    return float(np.sum(_cost(a_sorted - b_sorted, p)) / a_sorted.size)
