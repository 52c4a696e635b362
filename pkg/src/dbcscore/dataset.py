"""Two-class labeled datasets: CSV loading, synthetic blob generation,
exact nearest-neighbor queries and reproducible cross-class pair sampling.

All dataset objects are immutable after construction and safe to share
across worker processes. ``k_nearest`` and ``sample_pairs`` are pure
functions of their inputs; pair ``i`` is drawn from the sub-seed
``(seed, i)`` so results do not depend on evaluation order or on the
degree of parallelism.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed dataset files or contract violations."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix of shape (count, dimension) with binary row labels.

    Invariants: every label is 0 or 1, both classes are nonempty, and all
    feature values are finite.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or features.shape[0] == 0 or features.shape[1] == 0:
            raise DatasetError(f"features must be a nonempty 2-D matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DatasetError(
                f"labels shape {labels.shape} does not match {features.shape[0]} feature rows"
            )
        bad = ~np.isin(labels, (0, 1))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DatasetError(f"label at row {row} is {labels[row]!r}, expected 0 or 1")
        labels = labels.astype(np.int64)
        if not np.isfinite(features).all():
            row, col = np.argwhere(~np.isfinite(features))[0]
            raise DatasetError(f"non-finite feature value at row {row}, column {col}")
        for cls in (0, 1):
            if not (labels == cls).any():
                raise DatasetError(f"dataset has no rows with label {cls}")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    def class_indices(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True)
class ClassPair:
    """A cross-class pair: ``a`` carries label 0, ``b`` carries label 1."""

    a: np.ndarray
    b: np.ndarray
    index_a: int
    index_b: int


def load_csv(path, label_column="label") -> LabeledDataset:
    """Load a two-class dataset from a CSV file.

    ``label_column`` selects the label column by header name or by integer
    index. A header row is detected automatically: if any cell of the first
    row fails to parse as a number, the row is treated as a header.

    Raises DatasetError naming the offending row/column for unparseable
    cells, labels outside {0, 1}, or a missing class.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise DatasetError(f"empty file: {path}")

    def _is_numeric_row(cells):
        try:
            for cell in cells:
                float(cell)
        except ValueError:
            return False
        return True

    header = None
    if not _is_numeric_row(rows[0]):
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DatasetError(f"file has a header but no data rows: {path}")

    width = len(rows[0])
    if isinstance(label_column, int):
        label_idx = label_column if label_column >= 0 else width + label_column
    else:
        if header is None:
            raise DatasetError(
                f"label column {label_column!r} requested by name but file has no header"
            )
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DatasetError(f"label column {label_column!r} not found in header {header}") from None
    if not 0 <= label_idx < width:
        raise DatasetError(f"label column index {label_idx} out of range for {width} columns")

    features = np.empty((len(rows), width - 1), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DatasetError(f"row {r} has {len(row)} cells, expected {width}")
        col_out = 0
        for c, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise DatasetError(f"unparseable cell at row {r}, column {c}: {cell!r}") from None
            if c == label_idx:
                if value not in (0.0, 1.0):
                    raise DatasetError(f"label at row {r} is {cell!r}, expected 0 or 1")
                labels[r] = int(value)
            else:
                if not np.isfinite(value):
                    raise DatasetError(f"non-finite feature at row {r}, column {c}")
                features[r, col_out] = value
                col_out += 1
    return LabeledDataset(features, labels)


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset as CSV with header ``f0,...,f{n-1},label``.

    Floats are written with shortest round-trip precision, so a rerun with
    identical inputs produces a byte-identical file.
    """
    path = Path(path)
    names = [f"f{i}" for i in range(dataset.dimension)] + ["label"]
    lines = [",".join(names)]
    for row, label in zip(dataset.features, dataset.labels):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(label)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_blobs(per_class: int, dimension: int, center_distance: float,
               spread: float, seed: int) -> LabeledDataset:
    """Generate two isotropic Gaussian clusters, one per class.

    Cluster centers sit at ``±center_distance/2`` along the first feature
    axis; each cluster has ``per_class`` points with per-coordinate
    standard deviation ``spread``. Deterministic for a fixed seed.
    """
    if per_class < 1:
        raise DatasetError(f"per_class must be >= 1, got {per_class}")
    if dimension < 1:
        raise DatasetError(f"dimension must be >= 1, got {dimension}")
    if center_distance <= 0:
        raise DatasetError(f"center_distance must be > 0, got {center_distance}")
    if spread <= 0:
        raise DatasetError(f"spread must be > 0, got {spread}")
    rng = np.random.default_rng(seed)
    offset = np.zeros(dimension)
    offset[0] = center_distance / 2.0
    class0 = -offset + spread * rng.standard_normal((per_class, dimension))
    class1 = offset + spread * rng.standard_normal((per_class, dimension))
    features = np.vstack([class0, class1])
    labels = np.concatenate([np.zeros(per_class, dtype=np.int64),
                             np.ones(per_class, dtype=np.int64)])
    return LabeledDataset(features, labels)


def minmax_scale(dataset: LabeledDataset) -> LabeledDataset:
    """Rescale each feature to [0, 1]; constant features map to 0."""
    lo = dataset.features.min(axis=0)
    hi = dataset.features.max(axis=0)
    span = hi - lo
    span[span == 0] = 1.0
    return LabeledDataset((dataset.features - lo) / span, dataset.labels)


def k_nearest(dataset: LabeledDataset, query: np.ndarray, class_filter: int,
              k: int) -> list[int]:
    """Exact k-nearest rows of one class, by Euclidean distance to ``query``.

    Returns dataset row indices in nondecreasing distance order; ties break
    toward the lower row index. A stored row equal to the query is eligible
    and ranks first at distance zero, which is what makes a point its own
    nearest neighbor.
    """
    if k < 1:
        raise DatasetError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (dataset.dimension,):
        raise DatasetError(
            f"query shape {query.shape} does not match dataset dimension {dataset.dimension}"
        )
    candidates = dataset.class_indices(class_filter)
    if k > candidates.size:
        raise DatasetError(
            f"k={k} exceeds class-{class_filter} population of {candidates.size}"
        )
    deltas = dataset.features[candidates] - query
    distances = np.sqrt(np.einsum("ij,ij->i", deltas, deltas))
    order = np.lexsort((candidates, distances))
    return [int(i) for i in candidates[order[:k]]]


def sample_pair(dataset: LabeledDataset, pair_index: int, seed: int) -> ClassPair:
    """Draw the ``pair_index``-th cross-class pair of the (seed) sequence.

    The pair comes from the sub-seed ``(seed, pair_index)`` alone, so any
    pair can be reproduced without generating its predecessors.
    """
    rng = np.random.default_rng([seed, pair_index])
    idx0 = dataset.class_indices(0)
    idx1 = dataset.class_indices(1)
    ia = int(idx0[rng.integers(idx0.size)])
    ib = int(idx1[rng.integers(idx1.size)])
    return ClassPair(a=dataset.features[ia], b=dataset.features[ib],
                     index_a=ia, index_b=ib)


def sample_pairs(dataset: LabeledDataset, reps: int, seed: int) -> list[ClassPair]:
    """Draw ``reps`` cross-class pairs uniformly at random with replacement.

    Pair ``i`` is generated from the sub-seed ``(seed, i)``, so the sequence
    is identical whether pairs are consumed serially or split across
    workers.
    """
    if reps < 1:
        raise DatasetError(f"reps must be >= 1, got {reps}")
    return [sample_pair(dataset, i, seed) for i in range(reps)]
