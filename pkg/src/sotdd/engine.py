"""Sliced OT dataset distance: projection sketches and the Monte Carlo estimate.

Projections are processed in fixed blocks of ``BLOCK`` consecutive indices.
The block layout depends only on ``L``, never on the worker count, and every
reduction runs in a fixed order, so results are bitwise reproducible for any
number of workers and identical between the one-shot :func:`sotdd` and the
two-phase :func:`project_dataset` + :func:`sotdd_from_sketches` route.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import ClassIndex, Dataset, build_class_index
from .errors import DimensionMismatch, FingerprintMismatch, LengthMismatch, MomentOverflow, ShapeMismatch
from .projections import random_conv_projector, scaled_power_terms
from .sampling import DEFAULT_LAW, MomentOrderLaw, ProjectionParams, SeedSchedule, sample_projection_params
from .wasserstein1d import w1d_uniform_pp

BLOCK = 32
FINGERPRINT_FORMAT = "sotdd-config/1"
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SotddConfig:
    p: float = 2.0
    L: int = 1000
    k: int = 5
    law: MomentOrderLaw = DEFAULT_LAW
    projector: str = "linear"
    image_shape: Optional[tuple] = None
    tie_phi: bool = True
    standardize: bool = False
    seed: int = 0
    skip_overflow: bool = False
    psi_override: Optional[tuple] = None
    sketch_quantiles: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        self.law.check_k(self.k)
        if self.projector not in ("linear", "conv"):
            raise ValueError(f"unknown projector {self.projector!r}")
        if self.projector == "conv":
            if self.image_shape is None or len(self.image_shape) != 3:
                raise ValueError("conv projector needs image_shape=(H, W, C)")
            object.__setattr__(self, "image_shape", tuple(int(s) for s in self.image_shape))
        if self.psi_override is not None:
            psi = tuple(float(v) for v in self.psi_override)
            if len(psi) != self.k + 1:
                raise ValueError(f"psi override needs {self.k + 1} entries, got {len(psi)}")
            object.__setattr__(self, "psi_override", psi)
        if self.sketch_quantiles is not None and self.sketch_quantiles < 1:
            raise ValueError("sketch_quantiles must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def projector_spec(self) -> str:
        if self.projector == "conv":
            return "conv:" + ",".join(str(s) for s in self.image_shape)
        return "linear"

    def fingerprint(self, d: int) -> bytes:
        """SHA-256 of the canonical JSON of every field that shapes a sketch.

        ``p``, ``workers`` and ``skip_overflow`` are left out: they do not
        change projected values.
        """
        canonical = {
            "format": FINGERPRINT_FORMAT,
            "d": int(d),
            "L": int(self.L),
            "k": int(self.k),
            "law": self.law.spec(),
            "projector": self.projector_spec,
            "tie_phi": bool(self.tie_phi),
            "standardize": bool(self.standardize),
            "seed": int(self.seed),
            "psi_override": None if self.psi_override is None else [repr(v) for v in self.psi_override],
            "sketch_quantiles": self.sketch_quantiles,
        }
        text = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).digest()


@dataclass(eq=False)
class ProjectionSketch:
    """Sorted projected values of one dataset, one row per projection.

    A row of NaNs marks a projection dropped because of a moment overflow
    (only possible with ``skip_overflow``).
    """

    fingerprint: bytes
    values: np.ndarray
    name: str = ""

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def valid(self) -> np.ndarray:
        return ~np.isnan(self.values[:, 0])


@dataclass
class DistanceEstimate:
    value: float
    mean_pp: float
    stderr_pp: float
    L: int
    p: float
    wall_time: float = 0.0
    dropped: int = 0
    per_projection: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class _Prepared:
    """Rows regrouped class by class; output order does not matter because
    projected values are sorted anyway."""

    X: np.ndarray
    counts: np.ndarray
    starts: np.ndarray
    labels: tuple

    @classmethod
    def build(cls, dataset: Dataset, index: Optional[ClassIndex] = None) -> "_Prepared":
        index = build_class_index(dataset) if index is None else index
        counts = index.counts
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        X = np.ascontiguousarray(dataset.features[index.order()])
        return cls(X, counts, starts, index.classes)


def _feature_sampler(config: SotddConfig, d: int):
    if config.projector == "conv":
        shape = config.image_shape
        if shape[0] * shape[1] * shape[2] != d:
            raise ShapeMismatch(f"feature dimension {d} does not factor as {shape}")
        return lambda stream: random_conv_projector(shape, stream)
    return None


def draw_params(config: SotddConfig, d: int, indices) -> list:
    """Parameter tuples for the given projection indices."""
    schedule = SeedSchedule(config.seed)
    sampler = _feature_sampler(config, d)
    out = []
    for l in indices:
        params = sample_projection_params(d, config.k, config.law, config.tie_phi, schedule.stream(l), sampler)
        if config.psi_override is not None:
            params = params.with_psi(config.psi_override)
        out.append(params)
    return out


def _representer(theta) -> np.ndarray:
    if isinstance(theta, np.ndarray):
        return theta
    if hasattr(theta, "representer"):
        return theta.representer()
    return np.asarray(theta, dtype=np.float64)


def _project_block(prep: _Prepared, params: Sequence[ProjectionParams], first_index: int, skip_overflow: bool):
    """Sorted data-point projections for a block; dropped rows are NaN."""
    B = len(params)
    k = params[0].k
    d = prep.X.shape[1]
    thetas = np.stack([_representer(pr.theta) for pr in params])
    if thetas.shape[1] != d:
        raise DimensionMismatch(f"projection dimension {thetas.shape[1]} vs feature dimension {d}")
    fp = prep.X @ thetas.T
    if all(pr.tied for pr in params):
        fl = fp
    else:
        phis = np.stack([_representer(pr.label_projector) for pr in params])
        fl = prep.X @ phis.T
    lam = np.array([pr.lambdas for pr in params], dtype=np.int64)
    psi = np.stack([pr.psi for pr in params])
    c = len(prep.counts)
    moments = np.empty((c, B, k))
    with np.errstate(over="ignore", invalid="ignore"):
        for order in np.unique(lam):
            cols, slots = np.nonzero(lam == order)
            terms = scaled_power_terms(fl[:, cols], int(order))
            sums = np.add.reduceat(terms, prep.starts, axis=0)
            moments[:, cols, slots] = sums / prep.counts[:, None]
        finite = np.isfinite(moments).all(axis=(0, 2))
        out = psi[:, 0] * fp
        for i in range(k):
            out = out + psi[:, i + 1] * np.repeat(moments[:, :, i], prep.counts, axis=0)
    finite &= np.isfinite(out).all(axis=0)
    if not finite.all():
        b = int(np.flatnonzero(~finite)[0])
        if not skip_overflow:
            bad = ~np.isfinite(moments[:, b, :])
            if bad.any():
                ci, slot = np.argwhere(bad)[0]
                raise MomentOverflow(projection=first_index + b, label=prep.labels[ci], order=int(lam[b, slot]))
            raise MomentOverflow("projected value is not finite", projection=first_index + b)
        out[:, ~finite] = np.nan
    values = np.sort(out.T, axis=1)
    return values


def _quantize(values: np.ndarray, M: Optional[int]) -> np.ndarray:
    """Keep M quantiles at levels (i + 1/2)/M of each sorted row (lossy)."""
    if M is None or values.shape[1] <= M:
        return values
    n = values.shape[1]
    i = np.arange(M, dtype=np.int64)
    idx = ((2 * i + 1) * n + 2 * M - 1) // (2 * M) - 1
    return np.ascontiguousarray(values[:, idx])


def _blocks(L: int):
    return [(start, min(start + BLOCK, L)) for start in range(0, L, BLOCK)]


def _map_blocks(fn, L: int, workers: int):
    blocks = _blocks(L)
    if workers <= 1 or len(blocks) == 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _check_params(params, L):
    if params is not None and len(params) != L:
        raise LengthMismatch(f"{len(params)} parameter tuples supplied for L={L}")


def project_dataset(
    dataset: Dataset,
    index: Optional[ClassIndex] = None,
    config: SotddConfig = SotddConfig(),
    params: Optional[Sequence[ProjectionParams]] = None,
) -> ProjectionSketch:
    """Sketch one dataset: for each projection the sorted data-point projections.

    ``params`` forces explicit parameter tuples instead of drawing them from
    the seed schedule.  Standardization is not applied here; it needs both
    datasets and is done by :func:`sotdd`.
    """
    prep = _Prepared.build(dataset, index)
    d = dataset.d
    _check_params(params, config.L)

    def run(lo, hi):
        block = params[lo:hi] if params is not None else draw_params(config, d, range(lo, hi))
        return _quantize(_project_block(prep, block, lo, config.skip_overflow), config.sketch_quantiles)

    values = np.concatenate(_map_blocks(run, config.L, config.workers), axis=0)
    return ProjectionSketch(config.fingerprint(d), values, dataset.name)


def _block_w(v1: np.ndarray, v2: np.ndarray, p: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return _block_w_inner(v1, v2, p)


def _block_w_inner(v1: np.ndarray, v2: np.ndarray, p: float) -> np.ndarray:
    w = np.full(v1.shape[0], np.nan)
    ok = ~(np.isnan(v1[:, 0]) | np.isnan(v2[:, 0]))
    if ok.all():
        return w1d_uniform_pp(v1, v2, p)
    if ok.any():
        w[ok] = w1d_uniform_pp(v1[ok], v2[ok], p)
    return w


def _aggregate(w: np.ndarray, p: float, wall_time: float, skip_overflow: bool = False) -> DistanceEstimate:
    # finite projected values can still overflow once raised to the p-th power
    blown = np.isinf(w)
    if blown.any():
        if not skip_overflow:
            raise MomentOverflow("W_p^p is not finite", projection=int(np.flatnonzero(blown)[0]))
        w = np.where(blown, np.nan, w)
    valid = w[~np.isnan(w)]
    if valid.size == 0:
        raise MomentOverflow("every projection overflowed")
    mean_pp = float(np.mean(valid))
    with np.errstate(over="ignore", invalid="ignore"):
        stderr = float(np.std(valid, ddof=1) / math.sqrt(valid.size)) if valid.size > 1 else 0.0
    return DistanceEstimate(
        value=mean_pp ** (1.0 / p),
        mean_pp=mean_pp,
        stderr_pp=stderr,
        L=int(valid.size),
        p=p,
        wall_time=wall_time,
        dropped=int(w.size - valid.size),
        per_projection=w,
    )


def sotdd_from_sketches(
    s1: ProjectionSketch, s2: ProjectionSketch, p: float = 2.0, workers: int = 1, skip_overflow: bool = False
) -> DistanceEstimate:
    start = time.perf_counter()
    if s1.fingerprint != s2.fingerprint:
        raise FingerprintMismatch("sketches were produced with different configurations or seeds")
    if s1.L != s2.L:
        raise LengthMismatch(f"sketches have {s1.L} and {s2.L} projections")
    w = np.concatenate(_map_blocks(lambda lo, hi: _block_w(s1.values[lo:hi], s2.values[lo:hi], p), s1.L, workers))
    return _aggregate(w, p, time.perf_counter() - start, skip_overflow)


def standardize_pair(d1: Dataset, d2: Dataset):
    """Subtract the pooled mean and divide by the pooled per-coordinate std."""
    pooled = np.concatenate([d1.features, d2.features], axis=0)
    mean = pooled.mean(axis=0)
    scale = np.maximum(pooled.std(axis=0), STD_FLOOR)
    return (
        d1.with_features((d1.features - mean) / scale),
        d2.with_features((d2.features - mean) / scale),
    )


def per_projection_pp(d1: Dataset, d2: Dataset, config: SotddConfig, params=None) -> np.ndarray:
    """``W_p^p`` of every projection in index order (NaN where dropped)."""
    if d1.d != d2.d:
        raise DimensionMismatch(f"feature dimensions differ: {d1.d} vs {d2.d}")
    if config.standardize:
        d1, d2 = standardize_pair(d1, d2)
    _check_params(params, config.L)
    prep1, prep2 = _Prepared.build(d1), _Prepared.build(d2)
    d = d1.d

    def run(lo, hi):
        block = params[lo:hi] if params is not None else draw_params(config, d, range(lo, hi))
        v1 = _quantize(_project_block(prep1, block, lo, config.skip_overflow), config.sketch_quantiles)
        v2 = _quantize(_project_block(prep2, block, lo, config.skip_overflow), config.sketch_quantiles)
        return _block_w(v1, v2, config.p)

    return np.concatenate(_map_blocks(run, config.L, config.workers))


def sotdd(d1: Dataset, d2: Dataset, config: SotddConfig = SotddConfig(), params=None) -> DistanceEstimate:
    """Monte Carlo s-OTDD between two datasets.

    Works projection block by projection block and never holds more than
    one block of projected values, yet reproduces the sketch route exactly.
    """
    start = time.perf_counter()
    w = per_projection_pp(d1, d2, config, params)
    return _aggregate(w, config.p, time.perf_counter() - start, config.skip_overflow)


@dataclass
class DecayRow:
    L: int
    mean_abs_error: float
    repeats: int


def error_decay_profile(
    d1: Dataset,
    d2: Dataset,
    config: SotddConfig,
    grid: Sequence[int],
    repeats: int,
    reference_L: Optional[int] = None,
) -> list:
    """Mean absolute error of the ``W_p^p`` estimate against a reference, per L.

    Repeat ``r`` uses seed ``config.seed + 1 + r``; estimates for the grid
    are prefixes of that repeat's projection sequence.  The reference uses
    the held-out ``config.seed`` at ``reference_L`` (default: largest L).
    """
    grid = [int(g) for g in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])) or not grid or grid[0] < 1:
        raise ValueError("L grid must be ascending positive integers")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    top = grid[-1]
    ref_cfg = replace(config, L=reference_L or top)
    reference = float(np.nanmean(per_projection_pp(d1, d2, ref_cfg)))
    errors = np.empty((repeats, len(grid)))
    for r in range(repeats):
        w = per_projection_pp(d1, d2, replace(config, L=top, seed=config.seed + 1 + r))
        for j, L in enumerate(grid):
            errors[r, j] = abs(float(np.nanmean(w[:L])) - reference)
    return [DecayRow(L, float(errors[:, j].mean()), repeats) for j, L in enumerate(grid)]


__all__ = [
    "BLOCK",
    "DecayRow",
    "DistanceEstimate",
    "ProjectionSketch",
    "SotddConfig",
    "draw_params",
    "error_decay_profile",
    "per_projection_pp",
    "project_dataset",
    "sotdd",
    "sotdd_from_sketches",
    "standardize_pair",
]
