"""Labeled dataset container and per-class grouping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, LengthMismatch, NonFiniteFeature


def _frozen(array):
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable ``n x d`` feature matrix with one integer label per row.

    Construction validates the invariants; the arrays are stored
    read-only so the same instance can be shared between workers.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        labels = np.asarray(self.labels)
        if labels.dtype.kind not in "iu":
            rounded = labels.astype(np.int64)
            if not np.array_equal(rounded, labels):
                raise ValueError("labels must be integers")
            labels = rounded
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64).ravel()))
        validate_dataset(self)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_features(self, features, name=None) -> "Dataset":
        return Dataset(features, self.labels, self.name if name is None else name)

    def subset(self, rows, name=None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.labels[rows], self.name if name is None else name)


def validate_dataset(dataset) -> None:
    """Raise if ``dataset`` violates a Dataset invariant, else return None."""
    features = np.asarray(dataset.features)
    labels = np.asarray(dataset.labels)
    if features.ndim != 2:
        raise ValueError(f"features must be two-dimensional, got shape {features.shape}")
    n, d = features.shape
    if n == 0 or d == 0:
        raise EmptyDataset(f"dataset has shape {features.shape}; need n >= 1 and d >= 1")
    if labels.ndim != 1 or labels.shape[0] != n:
        raise LengthMismatch(f"{n} feature rows but {labels.size} labels")
    finite = np.isfinite(features)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise NonFiniteFeature(row, col)


@dataclass(frozen=True)
class ClassView:
    """The rows of one class, i.e. the empirical class-conditional distribution."""

    label: int
    dataset: Dataset = field(repr=False)
    rows: np.ndarray = field(repr=False)

    @property
    def features(self) -> np.ndarray:
        return self.dataset.features[self.rows]

    @property
    def size(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ClassIndex:
    classes: tuple
    members: tuple

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], dtype=np.int64)

    def __len__(self):
        return len(self.classes)

    def view(self, dataset: Dataset, label) -> ClassView:
        pos = self.classes.index(label)
        return ClassView(label, dataset, self.members[pos])

    def views(self, dataset: Dataset):
        return [ClassView(c, dataset, m) for c, m in zip(self.classes, self.members)]

    def order(self) -> np.ndarray:
        """Row permutation that groups rows class by class, in class order."""
        return np.concatenate(self.members)


def build_class_index(dataset: Dataset) -> ClassIndex:
    labels = np.asarray(dataset.labels)
    classes, inverse = np.unique(labels, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(np.bincount(inverse, minlength=len(classes)))[:-1]
    members = tuple(_frozen(m.astype(np.intp)) for m in np.split(order, bounds))
    return ClassIndex(tuple(int(c) for c in classes), members)
