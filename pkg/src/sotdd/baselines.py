"""Desk-scale reference distances.

* ``exact_ot``: discrete optimal transport solved as a min-cost flow by
  successive shortest augmenting paths (Dijkstra with node potentials) on
  the dense bipartite graph.
* ``label_distance_exact`` / ``label_distance_gaussian``: distances between
  class-conditional feature distributions.
* ``otdd``: OT over (feature, label) pairs with cost
  ``||x - x'||^p + d_Y(y, y')^p``.
* ``sliced_wasserstein``: plain Monte Carlo sliced Wasserstein on features.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import ClassView, Dataset, build_class_index
from .errors import DimensionMismatch, EigenFailure, InfeasibleMarginals, ScaleExceeded
from .sampling import SeedSchedule, sample_unit_sphere
from .wasserstein1d import w1d_uniform_pp

MAX_PAIRS = 10**6
MARGINAL_TOL = 1e-9
_GENERIC_SCALE = 1 << 40
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# Beyond this size the Jacobi sweeps get slow in Python; LAPACK takes over.
JACOBI_MAX_DIM = 64


@dataclass
class OTResult:
    """Optimal value, plan and a dual certificate.

    ``f`` and ``g`` satisfy ``f[i] + g[j] <= cost[i, j]``; the duality gap is
    ``value - (alpha @ f + beta @ g)``.
    """

    value: float
    plan: np.ndarray
    f: np.ndarray
    g: np.ndarray
    dual_value: float
    min_reduced_cost: float
    augmentations: int


def _integerize(weights: np.ndarray, common: int):
    """Integer supplies summing to ``common`` when the weights are exact
    multiples of ``1/common`` (uniform marginals are), else None."""
    scaled = weights * common
    rounded = np.rint(scaled)
    if np.all(np.abs(scaled - rounded) <= 1e-9) and rounded.sum() == common and np.all(rounded > 0):
        return rounded.astype(np.int64)
    return None


def _integerize_generic(weights: np.ndarray):
    """Round onto ``2**40`` units with the largest-remainder rule."""
    scaled = weights / weights.sum() * _GENERIC_SCALE
    base = np.floor(scaled).astype(np.int64)
    short = _GENERIC_SCALE - int(base.sum())
    if short:
        order = np.argsort(-(scaled - base), kind="stable")
        base[order[:short]] += 1
    return base


def _check_marginal(w, size, label):
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size != size:
        raise InfeasibleMarginals(f"{label} has {w.size} entries, expected {size}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise InfeasibleMarginals(f"{label} must be strictly positive")
    if abs(w.sum() - 1.0) > MARGINAL_TOL:
        raise InfeasibleMarginals(f"{label} sums to {w.sum()!r}, expected 1")
    return w


def exact_ot(cost, alpha=None, beta=None) -> OTResult:
    """Minimum of ``sum(plan * cost)`` over couplings of ``alpha`` and ``beta``.

    Marginals default to uniform.  Raises ScaleExceeded above 10**6 cost
    entries.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    n, m = cost.shape
    if n * m > MAX_PAIRS:
        raise ScaleExceeded(f"{n}x{m} cost matrix exceeds the {MAX_PAIRS}-entry guard")
    if n == 0 or m == 0:
        raise InfeasibleMarginals("empty marginal")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("cost entries must be finite and non-negative")
    alpha = np.full(n, 1.0 / n) if alpha is None else _check_marginal(alpha, n, "alpha")
    beta = np.full(m, 1.0 / m) if beta is None else _check_marginal(beta, m, "beta")
    total = n * m // math.gcd(n, m)
    supply, demand = _integerize(alpha, total), _integerize(beta, total)
    if supply is None or demand is None:
        total = _GENERIC_SCALE
        supply, demand = _integerize_generic(alpha), _integerize_generic(beta)
    flow, pi_s, pi_t, augmentations = _successive_shortest_paths(cost, supply.copy(), demand.copy())
    plan = flow / float(total)
    value = float(np.sum(plan * cost))
    f, g = -pi_s, pi_t
    dual_value = float(supply @ f / total + demand @ g / total)
    reduced = cost + pi_s[:, None] - pi_t[None, :]
    return OTResult(
        value=value,
        plan=plan,
        f=f,
        g=g,
        dual_value=dual_value,
        min_reduced_cost=float(reduced.min()),
        augmentations=augmentations,
    )


def _successive_shortest_paths(cost, supply, demand):
    n, m = cost.shape
    cost_t = np.ascontiguousarray(cost.T)
    flow = np.zeros((n, m), dtype=np.int64)
    pi_s = np.zeros(n)
    pi_t = np.zeros(m)
    pi_T = 0.0
    inf = math.inf
    augmentations = 0
    while supply.any():
        ds = np.where(supply > 0, -pi_s, inf)
        dt = np.full(m, inf)
        dT = inf
        done_s = np.zeros(n, dtype=bool)
        done_t = np.zeros(m, dtype=bool)
        prev_t = np.full(m, -1)
        prev_s = np.full(n, -1)
        prev_T = -1
        while True:
            cand_s = np.where(done_s, inf, ds)
            cand_t = np.where(done_t, inf, dt)
            i = int(np.argmin(cand_s))
            j = int(np.argmin(cand_t))
            vs, vt = cand_s[i], cand_t[j]
            if min(vs, vt) >= dT:
                break
            if vs == inf and vt == inf:
                raise InfeasibleMarginals("no augmenting path; marginals are inconsistent")
            if vs <= vt:
                done_s[i] = True
                nd = vs + cost[i] + pi_s[i] - pi_t
                better = (nd < dt) & ~done_t
                dt[better] = nd[better]
                prev_t[better] = i
            else:
                done_t[j] = True
                if demand[j] > 0:
                    cand = vt + pi_t[j] - pi_T
                    if cand < dT:
                        dT, prev_T = cand, j
                rows = flow[:, j] > 0
                if rows.any():
                    nd = vt - cost_t[j] + pi_t[j] - pi_s
                    better = rows & (nd < ds) & ~done_s
                    ds[better] = nd[better]
                    prev_s[better] = j
        if dT == inf:
            raise InfeasibleMarginals("no augmenting path; marginals are inconsistent")
        # walk back T <- j <- i <- j' <- i' ... <- S
        forward = []
        backward = []
        j = prev_T
        bottleneck = int(demand[j])
        while True:
            i = int(prev_t[j])
            forward.append((i, j))
            jb = int(prev_s[i])
            if jb < 0:
                bottleneck = min(bottleneck, int(supply[i]))
                source = i
                break
            backward.append((i, jb))
            bottleneck = min(bottleneck, int(flow[i, jb]))
            j = jb
        for i, j in forward:
            flow[i, j] += bottleneck
        for i, j in backward:
            flow[i, j] -= bottleneck
        supply[source] -= bottleneck
        demand[prev_T] -= bottleneck
        pi_s += np.minimum(ds, dT)
        pi_t += np.minimum(dt, dT)
        pi_T += dT
        augmentations += 1
    return flow, pi_s, pi_t, augmentations


def pairwise_distances(X, Y, chunk: int = 256) -> np.ndarray:
    """Euclidean distances between rows, from explicit differences."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    out = np.empty((X.shape[0], Y.shape[0]))
    for lo in range(0, X.shape[0], chunk):
        diff = X[lo : lo + chunk, None, :] - Y[None, :, :]
        out[lo : lo + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def label_distance_exact(class_a: ClassView, class_b: ClassView, p: float = 2.0) -> float:
    """``W_p`` between two empirical class-conditional distributions."""
    cost = pairwise_distances(class_a.features, class_b.features) ** p
    return exact_ot(cost).value ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def fit(cls, X) -> "GaussianSummary":
        """Mean and biased (1/n) covariance; one sample gives a zero matrix."""
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        centered = X - mean
        cov = centered.T @ centered / X.shape[0]
        return cls(mean, (cov + cov.T) / 2)


def _off_norm(A) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(A, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Stops once the off-diagonal Frobenius norm is below ``tol`` times the
    Frobenius norm of ``A``; raises EigenFailure after ``max_sweeps``.
    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns.
    """
    A = np.array(A, dtype=np.float64)
    d = A.shape[0]
    V = np.eye(d)
    scale = np.linalg.norm(A)
    if d <= 1 or scale == 0.0:
        return np.diag(A).copy(), V
    threshold = tol * scale
    for _ in range(max_sweeps):
        if _off_norm(A) <= threshold:
            return np.diag(A).copy(), V
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q]
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :]
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    if _off_norm(A) <= threshold:
        return np.diag(A).copy(), V
    raise EigenFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def _eigh(A):
    A = (A + A.T) / 2
    if A.shape[0] > JACOBI_MAX_DIM:
        try:
            return np.linalg.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise EigenFailure(str(exc)) from exc
    return jacobi_eigh(A)


def sqrtm_psd(A) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero."""
    vals, vecs = _eigh(np.asarray(A, dtype=np.float64))
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.T


def bures_wasserstein(g1: GaussianSummary, g2: GaussianSummary) -> float:
    """``W_2`` between two Gaussians from their means and covariances."""
    m1, m2 = np.asarray(g1.mean, dtype=np.float64), np.asarray(g2.mean, dtype=np.float64)
    S1, S2 = np.atleast_2d(g1.cov), np.atleast_2d(g2.cov)
    if m1.shape != m2.shape or S1.shape != S2.shape:
        raise DimensionMismatch("Gaussian summaries have different dimensions")
    if np.array_equal(m1, m2) and np.array_equal(S1, S2):
        return 0.0
    root1 = sqrtm_psd(S1)
    cross = root1 @ S2 @ root1
    vals, _ = _eigh(cross)
    cross_trace = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    total = float(np.sum((m1 - m2) ** 2)) + float(np.trace(S1) + np.trace(S2)) - 2.0 * cross_trace
    return math.sqrt(max(total, 0.0))


def label_distance_gaussian(class_a: ClassView, class_b: ClassView) -> float:
    return bures_wasserstein(GaussianSummary.fit(class_a.features), GaussianSummary.fit(class_b.features))


def label_distance_table(d1: Dataset, d2: Dataset, p: float = 2.0, label_mode: str = "exact"):
    """Label distances between every class of ``d1`` and every class of ``d2``."""
    idx1, idx2 = build_class_index(d1), build_class_index(d2)
    views1, views2 = idx1.views(d1), idx2.views(d2)
    table = np.empty((len(views1), len(views2)))
    if label_mode == "exact":
        for a, va in enumerate(views1):
            for b, vb in enumerate(views2):
                table[a, b] = label_distance_exact(va, vb, p)
    elif label_mode == "gaussian":
        g1 = [GaussianSummary.fit(v.features) for v in views1]
        g2 = [GaussianSummary.fit(v.features) for v in views2]
        for a, ga in enumerate(g1):
            for b, gb in enumerate(g2):
                table[a, b] = bures_wasserstein(ga, gb)
    else:
        raise ValueError(f"unknown label mode {label_mode!r}")
    return idx1, idx2, table


def otdd(d1: Dataset, d2: Dataset, p: float = 2.0, label_mode: str = "exact") -> float:
    """Exact OT dataset distance with exact or Gaussian label distances."""
    if d1.d != d2.d:
        raise DimensionMismatch(f"feature dimensions differ: {d1.d} vs {d2.d}")
    if d1.n * d2.n > MAX_PAIRS:
        raise ScaleExceeded(f"{d1.n}x{d2.n} pairs exceed the {MAX_PAIRS} guard")
    idx1, idx2, table = label_distance_table(d1, d2, p, label_mode)
    rows1 = np.searchsorted(np.array(idx1.classes), d1.labels)
    rows2 = np.searchsorted(np.array(idx2.classes), d2.labels)
    cost = pairwise_distances(d1.features, d2.features) ** p + table[np.ix_(rows1, rows2)] ** p
    return exact_ot(cost).value ** (1.0 / p)


@dataclass
class SlicedEstimate:
    value: float
    mean_pp: float
    stderr_pp: float
    L: int
    p: float
    wall_time: float
    per_projection: Optional[np.ndarray] = None


def sliced_wasserstein(features1, features2, L: int = 1000, p: float = 2.0, seed: int = 0, block: int = 32) -> SlicedEstimate:
    """Monte Carlo sliced Wasserstein; direction ``l`` is the first draw of
    stream ``l`` of ``seed``, the same stream the s-OTDD engine uses."""
    start = time.perf_counter()
    X1 = np.asarray(features1, dtype=np.float64)
    X2 = np.asarray(features2, dtype=np.float64)
    if X1.shape[1] != X2.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {X1.shape[1]} vs {X2.shape[1]}")
    d = X1.shape[1]
    schedule = SeedSchedule(seed)
    w = np.empty(L)
    for lo in range(0, L, block):
        hi = min(lo + block, L)
        thetas = np.stack([sample_unit_sphere(d, schedule.stream(l)) for l in range(lo, hi)])
        p1 = np.sort((X1 @ thetas.T).T, axis=1)
        p2 = np.sort((X2 @ thetas.T).T, axis=1)
        w[lo:hi] = w1d_uniform_pp(p1, p2, p)
    mean_pp = float(np.mean(w))
    stderr = float(np.std(w, ddof=1) / math.sqrt(L)) if L > 1 else 0.0
    return SlicedEstimate(mean_pp ** (1.0 / p), mean_pp, stderr, L, p, time.perf_counter() - start, w)
