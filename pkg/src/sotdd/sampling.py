"""Reproducible draws of random projection parameters.

Every projection index ``l`` gets its own generator derived from the master
seed, so parameter tuple ``l`` is the same no matter which worker draws it
or in which order.  Within a stream the draw order is fixed: feature
direction, moment orders, mixing weights, then (when untied) the label
direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidDimension, InvalidRate

TIED_TO_THETA = "tied-to-theta"

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSchedule:
    master_seed: int

    def stream(self, index: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed & _SEED_MASK, spawn_key=(int(index),))
        return np.random.Generator(np.random.PCG64(seq))


def stream_for(seed: int, index: int) -> np.random.Generator:
    return SeedSchedule(seed).stream(index)


@dataclass(frozen=True)
class MomentOrderLaw:
    """Law of the moment-order vector.

    ``kind`` is ``"poisson"`` (product of zero-truncated Poissons, one rate
    per coordinate) or ``"uniform"`` (i.i.d. uniform on ``1..lambda_max``).
    """

    kind: str
    rates: tuple = ()
    lambda_max: int = 0

    def __post_init__(self):
        if self.kind == "poisson":
            rates = tuple(float(r) for r in self.rates)
            if not rates:
                raise ValueError("poisson moment law needs at least one rate")
            if any(not np.isfinite(r) or r <= 0 for r in rates):
                raise InvalidRate(f"rates must be positive, got {rates}")
            object.__setattr__(self, "rates", rates)
        elif self.kind == "uniform":
            if int(self.lambda_max) < 1:
                raise ValueError(f"lambda_max must be >= 1, got {self.lambda_max}")
            object.__setattr__(self, "lambda_max", int(self.lambda_max))
        else:
            raise ValueError(f"unknown moment law {self.kind!r}")

    @classmethod
    def poisson(cls, rates) -> "MomentOrderLaw":
        return cls("poisson", rates=tuple(rates))

    @classmethod
    def uniform(cls, lambda_max: int) -> "MomentOrderLaw":
        return cls("uniform", lambda_max=lambda_max)

    @classmethod
    def parse(cls, text: str) -> "MomentOrderLaw":
        """Parse ``poisson:1,2,3`` or ``uniform:4``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        if kind == "poisson":
            return cls.poisson(float(a) for a in arg.split(",") if a.strip())
        if kind == "uniform":
            return cls.uniform(int(arg))
        raise ValueError(f"unknown moment law {text!r}")

    def spec(self) -> str:
        if self.kind == "poisson":
            return "poisson:" + ",".join(repr(r) for r in self.rates)
        return f"uniform:{self.lambda_max}"

    def check_k(self, k: int) -> None:
        if self.kind == "poisson" and len(self.rates) != k:
            raise ValueError(f"poisson law has {len(self.rates)} rates but k={k}")

    def draw(self, k: int, stream: np.random.Generator) -> tuple:
        self.check_k(k)
        if self.kind == "poisson":
            return tuple(sample_ztpoisson(r, stream) for r in self.rates)
        return tuple(int(v) for v in stream.integers(1, self.lambda_max + 1, size=k))


DEFAULT_LAW = MomentOrderLaw.poisson((1.0, 2.0, 3.0, 4.0, 5.0))


@dataclass(frozen=True, eq=False)
class ProjectionParams:
    """One draw of (psi, theta, lambdas, phi).

    ``theta`` and ``phi`` are whatever the feature projector consumes: a
    unit direction for linear projections, a projector object otherwise.
    ``phi`` is :data:`TIED_TO_THETA` when the label projection reuses theta.
    """

    psi: np.ndarray
    theta: object
    lambdas: tuple
    phi: object = TIED_TO_THETA

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @property
    def tied(self) -> bool:
        return isinstance(self.phi, str) and self.phi == TIED_TO_THETA

    @property
    def label_projector(self):
        return self.theta if self.tied else self.phi

    def with_psi(self, psi) -> "ProjectionParams":
        return ProjectionParams(np.asarray(psi, dtype=np.float64), self.theta, self.lambdas, self.phi)


def sample_unit_sphere(dim: int, stream: np.random.Generator) -> np.ndarray:
    """Uniform draw from the unit sphere in ``R^dim`` (normalized Gaussian)."""
    if dim < 1:
        raise InvalidDimension(f"sphere dimension must be >= 1, got {dim}")
    while True:
        v = stream.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0.0 and np.isfinite(norm):
            return v / norm


def sample_ztpoisson(rate: float, stream: np.random.Generator, size=None):
    """Zero-truncated Poisson draw(s) by rejecting zeros from Poisson(rate).

    Returns a Python int when ``size`` is None, else an int64 array.
    """
    if not rate > 0 or not np.isfinite(rate):
        raise InvalidRate(f"rate must be positive, got {rate}")
    if size is None:
        while True:
            k = int(stream.poisson(rate))
            if k > 0:
                return k
    out = stream.poisson(rate, size=size).astype(np.int64)
    flat = out.reshape(-1)
    bad = np.flatnonzero(flat == 0)
    while bad.size:
        flat[bad] = stream.poisson(rate, size=bad.size)
        bad = bad[flat[bad] == 0]
    return out


def sample_projection_params(
    d: int,
    k: int,
    law: MomentOrderLaw,
    tie_phi: bool,
    stream: np.random.Generator,
    feature_sampler: Optional[Callable[[np.random.Generator], object]] = None,
) -> ProjectionParams:
    if k < 1:
        raise InvalidDimension(f"k must be >= 1, got {k}")
    if feature_sampler is None:
        if d < 1:
            raise InvalidDimension(f"d must be >= 1, got {d}")

        def feature_sampler(s):
            return sample_unit_sphere(d, s)

    theta = feature_sampler(stream)
    lambdas = law.draw(k, stream)
    psi = sample_unit_sphere(k + 1, stream)
    phi = TIED_TO_THETA if tie_phi else feature_sampler(stream)
    return ProjectionParams(psi=psi, theta=theta, lambdas=lambdas, phi=phi)
