"""Feature projections, scaled moments, label (moment transform) projection
and the data-point projection that combines them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, MomentOverflow, ShapeMismatch

# Above this order the factorial goes through lgamma instead of exact products.
_EXACT_FACTORIAL_MAX = 20


class LinearProjector:
    """``x -> direction . x`` (a Radon-type slice)."""

    kind = "linear"

    def __init__(self, direction):
        self.direction = np.ascontiguousarray(direction, dtype=np.float64).ravel()

    @property
    def d(self) -> int:
        return self.direction.size

    def representer(self) -> np.ndarray:
        return self.direction

    def project(self, X) -> np.ndarray:
        """Project the rows of ``X``.

        Each row is reduced independently of the others, so projecting a
        subset of rows gives bitwise the same values as slicing the full
        projection.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"direction has dimension {self.d}, rows have {X.shape[1]}")
        return np.einsum("ij,j->i", X, self.direction)


def feature_project_linear(direction, x) -> float:
    direction = np.asarray(direction, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if direction.shape != x.shape:
        raise DimensionMismatch(f"direction has dimension {direction.size}, x has {x.size}")
    return float(np.dot(direction, x))


@dataclass(frozen=True, eq=False)
class ConvStage:
    """One strided single-output-channel convolution; kernel is ``(kh, kw, c_in)``."""

    kernel: np.ndarray
    stride: int = 2
    padding: int = 1

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=np.float64)
        if kernel.ndim == 2:
            kernel = kernel[:, :, None]
        if kernel.ndim != 3:
            raise ShapeMismatch(f"kernel must be (kh, kw, c_in), got shape {kernel.shape}")
        object.__setattr__(self, "kernel", kernel)

    def output_hw(self, h: int, w: int):
        kh, kw, _ = self.kernel.shape
        ho = (h + 2 * self.padding - kh) // self.stride + 1
        wo = (w + 2 * self.padding - kw) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"kernel {kh}x{kw} does not fit a {h}x{w} input")
        return ho, wo

    def forward(self, x: np.ndarray) -> np.ndarray:
        # x: (N, H, W, C) -> (N, Ho, Wo, 1)
        n, h, w, c = x.shape
        kh, kw, cin = self.kernel.shape
        if c != cin:
            raise ShapeMismatch(f"stage expects {cin} channels, got {c}")
        ho, wo = self.output_hw(h, w)
        p, s = self.padding, self.stride
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        out = np.zeros((n, ho, wo))
        for a in range(kh):
            for b in range(kw):
                window = xp[:, a : a + s * (ho - 1) + 1 : s, b : b + s * (wo - 1) + 1 : s, :]
                out += window @ self.kernel[a, b]
        return out[..., None]

    def adjoint(self, g: np.ndarray, h: int, w: int) -> np.ndarray:
        # g: (Ho, Wo) -> (H, W, C)
        kh, kw, cin = self.kernel.shape
        ho, wo = g.shape
        p, s = self.padding, self.stride
        gp = np.zeros((h + 2 * p, w + 2 * p, cin))
        for a in range(kh):
            for b in range(kw):
                gp[a : a + s * (ho - 1) + 1 : s, b : b + s * (wo - 1) + 1 : s, :] += (
                    g[:, :, None] * self.kernel[a, b]
                )
        return gp[p : p + h, p : p + w, :]


class ConvProjector:
    """Cascade of strided convolutions followed by a flattened mixing vector.

    Images are ``H x W x C`` and flattened row-major (channels last) when
    stored as feature rows.  The whole map is linear, so it has a
    representer vector ``w`` with ``project(x) == w . x``.
    """

    kind = "conv"

    def __init__(self, shape, stages, mix):
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != 3 or min(self.shape) < 1:
            raise ShapeMismatch(f"image shape must be (H, W, C), got {shape}")
        self.stages = tuple(stages)
        h, w, c = self.shape
        self._dims = []
        for stage in self.stages:
            self._dims.append((h, w))
            h, w = stage.output_hw(h, w)
            c = 1
        self.final_shape = (h, w, c)
        self.mix = np.asarray(mix, dtype=np.float64).ravel()
        if self.mix.size != h * w * c:
            raise ShapeMismatch(f"mixing vector has {self.mix.size} entries, final map has {h * w * c}")

    @property
    def d(self) -> int:
        h, w, c = self.shape
        return h * w * c

    def forward(self, images) -> np.ndarray:
        x = np.asarray(images, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.shape[1:] != self.shape:
            raise ShapeMismatch(f"projector expects images of shape {self.shape}, got {x.shape[1:]}")
        for stage in self.stages:
            x = stage.forward(x)
        out = x.reshape(x.shape[0], -1) @ self.mix
        return out[0] if single else out

    @cached_property
    def _representer(self) -> np.ndarray:
        g = self.mix.reshape(self.final_shape)
        for stage, (h, w) in zip(reversed(self.stages), reversed(self._dims)):
            g = stage.adjoint(g[:, :, 0], h, w)
        out = np.ascontiguousarray(g.reshape(-1))
        out.setflags(write=False)
        return out

    def representer(self) -> np.ndarray:
        return self._representer

    def project(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise ShapeMismatch(f"rows have dimension {X.shape[1]}, projector expects {self.shape}")
        return np.einsum("ij,j->i", X, self._representer)


def feature_project_conv(projector: ConvProjector, image) -> float:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != projector.shape:
        if image.size == projector.d and image.ndim == 1:
            image = image.reshape(projector.shape)
        else:
            raise ShapeMismatch(f"projector expects shape {projector.shape}, got {image.shape}")
    return float(projector.forward(image))


def random_conv_projector(shape, stream: np.random.Generator) -> ConvProjector:
    """Random 3x3 stride-2 cascade down to spatial size <= 3, unit-norm overall."""
    h, w, c = (int(s) for s in shape)
    stages = []
    cin = c
    while max(h, w) > 3:
        stage = ConvStage(stream.standard_normal((3, 3, cin)), stride=2, padding=1)
        stages.append(stage)
        h, w = stage.output_hw(h, w)
        cin = 1
    mix = stream.standard_normal(h * w * cin)
    proj = ConvProjector(shape, stages, mix)
    norm = np.linalg.norm(proj.representer())
    if not norm > 0:
        return random_conv_projector(shape, stream)
    return ConvProjector(shape, stages, mix / norm)


def factorial(order: int) -> float:
    if order <= _EXACT_FACTORIAL_MAX:
        return float(math.factorial(order))
    return math.exp(math.lgamma(order + 1))


def _int_power(values: np.ndarray, order: int) -> np.ndarray:
    # square-and-multiply, same operation sequence for every element
    result = None
    base = values
    while True:
        if order & 1:
            result = base.copy() if result is None else result * base
        order >>= 1
        if not order:
            return result
        base = base * base


def scaled_power_terms(values, order: int) -> np.ndarray:
    """Elementwise ``v**order / order!`` for an array of any shape."""
    if order < 1:
        raise ValueError(f"moment order must be >= 1, got {order}")
    values = np.asarray(values, dtype=np.float64)
    if order <= _EXACT_FACTORIAL_MAX:
        with np.errstate(over="ignore", invalid="ignore"):
            return _int_power(values, order) / factorial(order)
    mag = np.abs(values)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logs = order * np.log(mag) - math.lgamma(order + 1)
        terms = np.exp(logs)
    terms = np.where(mag == 0.0, 0.0, terms)
    if order % 2:
        terms = np.where(values < 0, -terms, terms)
    return terms


def scaled_moment(values, order: int) -> float:
    """Empirical scaled moment ``mean(v**order) / order!``.

    Raises MomentOverflow when any term or the mean is not finite.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("scaled moment of an empty sample")
    terms = scaled_power_terms(values, order)
    with np.errstate(over="ignore", invalid="ignore"):
        total = terms.sum()
    if not np.isfinite(total):
        raise MomentOverflow(order=order)
    return float(total / values.size)


def mtp(class_view, projector, order: int, projected_cache=None) -> float:
    """Moment transform projection of one class: scaled moment of its projected rows."""
    if class_view.size == 0:
        raise ValueError("empty class")
    if projected_cache is not None:
        values = np.asarray(projected_cache)[class_view.rows]
    else:
        values = projector.project(class_view.features)
    try:
        return scaled_moment(values, order)
    except MomentOverflow as exc:
        raise MomentOverflow(label=class_view.label, order=order) from exc


def data_point_project(psi, fp_value, mtp_values):
    """``psi[0] * fp + sum_i psi[i+1] * mtp[i]``, accumulated left to right.

    ``fp_value`` may be a scalar or an array of per-row feature projections.
    """
    psi = np.asarray(psi, dtype=np.float64).ravel()
    mtp_values = np.asarray(mtp_values, dtype=np.float64).ravel()
    if psi.size != mtp_values.size + 1:
        raise LengthMismatch(f"psi has {psi.size} entries but there are {mtp_values.size} moment values")
    out = psi[0] * np.asarray(fp_value, dtype=np.float64)
    for weight, value in zip(psi[1:], mtp_values):
        out = out + weight * value
    return float(out) if out.ndim == 0 else out
