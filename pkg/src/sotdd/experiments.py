"""Synthetic data and the correlation / error-decay harnesses."""

from __future__ import annotations

import time
from dataclasses import asdict

import numpy as np

from . import baselines
from .dataset import Dataset
from .engine import SotddConfig, error_decay_profile, sotdd
from .stats import loglog_slope, pearson, spearman

BASELINES = ("exact-otdd", "gaussian-otdd", "sw")


def gaussian_mixture(n: int, d: int, classes: int, seed: int = 0, separation: float = 1.0, name: str = "mixture") -> Dataset:
    """Balanced-in-expectation mixture: class means ~ N(0, separation^2 I),
    within-class noise N(0, s^2 I) with a class-specific scale s in [0.5, 1.5]."""
    rng = np.random.default_rng(seed)
    means = rng.normal(scale=separation, size=(classes, d))
    scales = rng.uniform(0.5, 1.5, size=classes)
    labels = rng.integers(0, classes, size=n)
    X = means[labels] + rng.normal(size=(n, d)) * scales[labels, None]
    return Dataset(X, labels, name)


def random_split_pairs(dataset: Dataset, size: int, pairs: int, seed: int = 0, concentration: float = 1.0):
    """Disjoint pairs of subsets with random class proportions.

    Each side draws Dirichlet class proportions and then samples ``size``
    rows without replacement, with per-row probability proportional to its
    class's proportion.
    """
    rng = np.random.default_rng(seed)
    classes, inverse = np.unique(dataset.labels, return_inverse=True)
    if 2 * size > dataset.n:
        raise ValueError(f"cannot draw two disjoint splits of {size} from {dataset.n} rows")
    out = []
    for t in range(pairs):
        available = np.ones(dataset.n, dtype=bool)
        sides = []
        for side in range(2):
            props = rng.dirichlet(np.full(classes.size, concentration))
            counts = np.bincount(inverse[available], minlength=classes.size)
            weight = np.where(available, props[inverse] / np.maximum(counts[inverse], 1), 0.0)
            # floor keeps every available row drawable so `size` rows always exist
            weight = np.where(available, weight + 1e-12, 0.0)
            rows = rng.choice(dataset.n, size=size, replace=False, p=weight / weight.sum())
            available[rows] = False
            sides.append(dataset.subset(np.sort(rows), name=f"{dataset.name}-pair{t}-{'ab'[side]}"))
        out.append(tuple(sides))
    return out


def baseline_distance(kind: str, d1: Dataset, d2: Dataset, config: SotddConfig) -> float:
    if kind == "exact-otdd":
        return baselines.otdd(d1, d2, config.p, "exact")
    if kind == "gaussian-otdd":
        return baselines.otdd(d1, d2, config.p, "gaussian")
    if kind == "sw":
        return baselines.sliced_wasserstein(d1.features, d2.features, config.L, config.p, config.seed).value
    raise ValueError(f"unknown baseline {kind!r}; choose from {BASELINES}")


def correlate(dataset: Dataset, split_size: int, pairs: int, config: SotddConfig, baseline: str = "exact-otdd", split_seed: int = 0) -> dict:
    """s-OTDD against a baseline over random split pairs; Pearson and Spearman."""
    start = time.perf_counter()
    sotdd_values, baseline_values = [], []
    for d1, d2 in random_split_pairs(dataset, split_size, pairs, split_seed):
        sotdd_values.append(sotdd(d1, d2, config).value)
        baseline_values.append(baseline_distance(baseline, d1, d2, config))
    return {
        "command": "correlate",
        "baseline": baseline,
        "pairs": pairs,
        "split_size": split_size,
        "sotdd": sotdd_values,
        "baseline_values": baseline_values,
        "pearson": pearson(sotdd_values, baseline_values),
        "spearman": spearman(sotdd_values, baseline_values),
        "wall_time": time.perf_counter() - start,
    }


def decay(d1: Dataset, d2: Dataset, config: SotddConfig, grid, repeats: int) -> dict:
    start = time.perf_counter()
    rows = error_decay_profile(d1, d2, config, grid, repeats)
    table = [asdict(r) for r in rows]
    slope = intercept = None
    positive = [(r.L, r.mean_abs_error) for r in rows if r.mean_abs_error > 0]
    if len(positive) >= 3:
        slope, intercept = loglog_slope(positive)
    return {
        "command": "decay",
        "table": table,
        "slope": slope,
        "intercept": intercept,
        "repeats": repeats,
        "wall_time": time.perf_counter() - start,
    }


__all__ = ["BASELINES", "baseline_distance", "correlate", "decay", "gaussian_mixture", "random_split_pairs"]
