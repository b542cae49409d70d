"""Sliced optimal transport dataset distance (s-OTDD).

Datasets of labelled feature vectors are compared by projecting every
(feature, label) pair to a scalar, combining a feature projection with
scaled moments of the label's class-conditional projections, and averaging
one-dimensional Wasserstein distances over random projections.
"""

from .baselines import exact_ot, otdd, sliced_wasserstein
from .dataset import ClassIndex, Dataset, build_class_index
from .engine import (
    DistanceEstimate,
    ProjectionSketch,
    SotddConfig,
    error_decay_profile,
    project_dataset,
    sotdd,
    sotdd_from_sketches,
)
from .errors import SotddError
from .sampling import MomentOrderLaw

__version__ = "0.1.0"

__all__ = [
    "ClassIndex",
    "Dataset",
    "DistanceEstimate",
    "MomentOrderLaw",
    "ProjectionSketch",
    "SotddConfig",
    "SotddError",
    "build_class_index",
    "error_decay_profile",
    "exact_ot",
    "otdd",
    "project_dataset",
    "sliced_wasserstein",
    "sotdd",
    "sotdd_from_sketches",
]
