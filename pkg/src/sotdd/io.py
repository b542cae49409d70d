"""Dataset ingestion, sketch persistence and JSON run reports.

Binary dataset file (all little-endian)::

    "SOTD"  u32 version=1  u64 n  u64 d
    n*d float64 features, row-major
    n   int64 labels

Sketch file (all little-endian)::

    "SKCH"  u32 version=1  32-byte config fingerprint  u64 L  u64 n
    L blocks of n ascending float64 values (a NaN block = dropped projection)
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dataset import Dataset
from .engine import ProjectionSketch
from .errors import (
    BadMagic,
    CountMismatch,
    EmptyDataset,
    FormatError,
    MissingLabelColumn,
    ParseError,
    RaggedRows,
    TruncatedFile,
    VersionUnsupported,
)

DATASET_MAGIC = b"SOTD"
SKETCH_MAGIC = b"SKCH"
FORMAT_VERSION = 1
_DATASET_HEADER = struct.Struct("<4sIQQ")
_SKETCH_HEADER = struct.Struct("<4sI32sQQ")
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _parse_float(text, row, column):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", row=row, column=column) from None


def _parse_label(text, row, column):
    try:
        return int(text)
    except ValueError:
        value = _parse_float(text, row, column)
        if not value.is_integer():
            raise ParseError(f"label is not an integer: {text!r}", row=row, column=column) from None
        return int(value)


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def read_csv_dataset(path: PathLike, label_column: Union[str, int] = -1, name: Optional[str] = None) -> Dataset:
    """Read a numeric CSV with one label column.

    A first row containing any non-numeric cell is treated as a header.
    ``label_column`` is a header name or a (possibly negative) column index.
    Reported row numbers are 1-based file lines; columns are 0-based.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    header = None
    first_line = 1
    if rows and not all(_is_number(cell) for cell in rows[0]):
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
        first_line = 2
    width = len(header) if header is not None else (len(rows[0]) if rows else 0)
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise MissingLabelColumn(f"no column named {label_column!r}")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if width and not -width <= label_idx < width:
            raise MissingLabelColumn(f"label column {label_idx} out of range for {width} columns")
        label_idx %= max(width, 1)
    if not rows:
        raise EmptyDataset(f"{path} has no data rows")
    if width < 2:
        raise MissingLabelColumn("need at least one feature column besides the label column")
    features = np.empty((len(rows), width - 1))
    labels = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        line = r + first_line
        if len(row) != width:
            raise RaggedRows(f"line {line} has {len(row)} cells, expected {width}")
        labels[r] = _parse_label(row[label_idx].strip(), line, label_idx)
        j = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                continue
            features[r, j] = _parse_float(cell.strip(), line, c)
            j += 1
    return Dataset(features, labels, name or path.stem)


def write_csv_dataset(dataset: Dataset, path: PathLike) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(dataset.d)] + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def dataset_to_bytes(dataset: Dataset) -> bytes:
    header = _DATASET_HEADER.pack(DATASET_MAGIC, FORMAT_VERSION, dataset.n, dataset.d)
    return header + dataset.features.astype("<f8").tobytes() + dataset.labels.astype("<i8").tobytes()


def dataset_from_bytes(data: bytes, name: str = "") -> Dataset:
    if len(data) < 4 or data[:4] != DATASET_MAGIC:
        raise BadMagic(f"expected magic {DATASET_MAGIC!r}, got {bytes(data[:4])!r}")
    if len(data) < _DATASET_HEADER.size:
        raise TruncatedFile("file ends inside the header")
    _, version, n, d = _DATASET_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"dataset format version {version} is not supported")
    expected = _DATASET_HEADER.size + 8 * n * d + 8 * n
    if len(data) < expected:
        raise TruncatedFile(f"expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after the declared body")
    offset = _DATASET_HEADER.size
    features = np.frombuffer(data, dtype="<f8", count=n * d, offset=offset).reshape(n, d)
    labels = np.frombuffer(data, dtype="<i8", count=n, offset=offset + 8 * n * d)
    return Dataset(features.astype(np.float64), labels.astype(np.int64), name)


def write_binary_dataset(dataset: Dataset, path: PathLike) -> None:
    Path(path).write_bytes(dataset_to_bytes(dataset))


def read_binary_dataset(path: PathLike) -> Dataset:
    path = Path(path)
    return dataset_from_bytes(path.read_bytes(), path.stem)


def _read_idx(path: PathLike, expected_magic: int):
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedFile(f"{path} is too short for an IDX header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise BadMagic(f"{path}: expected IDX magic {expected_magic:#010x}, got {magic:#010x}")
    ndim = data[3]
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedFile(f"{path} ends inside the IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) < header + count:
        raise TruncatedFile(f"{path}: expected {header + count} bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def read_idx_pair(images_path: PathLike, labels_path: PathLike, name: Optional[str] = None) -> Dataset:
    """MNIST-style IDX images (ubyte, n x H x W) and labels (ubyte, n)."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64)
    return Dataset(features, labels.astype(np.int64), name or Path(images_path).stem)


def write_idx_pair(images, labels, images_path: PathLike, labels_path: PathLike) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(
        struct.pack(">I", IDX_IMAGES_MAGIC) + struct.pack(">3I", *images.shape) + images.tobytes()
    )
    Path(labels_path).write_bytes(struct.pack(">I", IDX_LABELS_MAGIC) + struct.pack(">I", labels.size) + labels.tobytes())


def load_dataset(spec: str, label_column: Union[str, int] = -1) -> Dataset:
    """Open a dataset by path: ``IMAGES,LABELS`` for an IDX pair, a CSV file,
    or a binary SOTD file (recognised by its magic)."""
    if "," in spec:
        images, labels = spec.split(",", 1)
        return read_idx_pair(images, labels)
    path = Path(spec)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == DATASET_MAGIC:
        return read_binary_dataset(path)
    return read_csv_dataset(path, label_column)


def dataset_fingerprint(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(struct.pack("<QQ", dataset.n, dataset.d))
    h.update(dataset.features.astype("<f8").tobytes())
    h.update(dataset.labels.astype("<i8").tobytes())
    return h.hexdigest()


def sketch_to_bytes(sketch: ProjectionSketch) -> bytes:
    if len(sketch.fingerprint) != 32:
        raise ValueError("sketch fingerprint must be 32 bytes")
    header = _SKETCH_HEADER.pack(SKETCH_MAGIC, FORMAT_VERSION, sketch.fingerprint, sketch.L, sketch.n)
    return header + np.ascontiguousarray(sketch.values, dtype="<f8").tobytes()


def sketch_from_bytes(data: bytes, name: str = "") -> ProjectionSketch:
    if len(data) < 4 or data[:4] != SKETCH_MAGIC:
        raise BadMagic(f"expected magic {SKETCH_MAGIC!r}, got {bytes(data[:4])!r}")
    if len(data) < _SKETCH_HEADER.size:
        raise TruncatedFile("file ends inside the sketch header")
    _, version, fingerprint, L, n = _SKETCH_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"sketch format version {version} is not supported")
    expected = _SKETCH_HEADER.size + 8 * L * n
    if len(data) < expected:
        raise TruncatedFile(f"expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after the declared body")
    values = np.frombuffer(data, dtype="<f8", count=L * n, offset=_SKETCH_HEADER.size).reshape(L, n)
    values = values.astype(np.float64)
    valid = ~np.isnan(values).all(axis=1)
    if np.any(np.diff(values[valid], axis=1) < 0):
        raise FormatError("sketch block is not ascending")
    return ProjectionSketch(bytes(fingerprint), values, name)


def write_sketch(sketch: ProjectionSketch, path: PathLike) -> None:
    Path(path).write_bytes(sketch_to_bytes(sketch))


def read_sketch(path: PathLike) -> ProjectionSketch:
    path = Path(path)
    return sketch_from_bytes(path.read_bytes(), path.stem)


@dataclass
class RunReport:
    """One machine-readable record per run; encodes to a single JSON line."""

    command: str
    value: Optional[float] = None
    mean_pp: Optional[float] = None
    stderr_pp: Optional[float] = None
    L: Optional[int] = None
    p: Optional[float] = None
    k: Optional[int] = None
    seed: Optional[int] = None
    projector: Optional[str] = None
    moment_law: Optional[str] = None
    wall_time: float = 0.0
    inputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))
