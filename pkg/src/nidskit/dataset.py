"""NetFlow-style CSV loading, cleaning, label encoding, and splitting.

A :class:`Dataset` is the value threaded through every pipeline stage: a
float64 feature matrix, canonical column names, integer class labels, and
the label map that ties indices back to class names.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .validation import as_int_labels

__all__ = [
    "LabelMap",
    "Dataset",
    "CleanReport",
    "SplitSpec",
    "canonicalize_name",
    "load_csv",
    "clean",
    "one_hot",
    "split",
    "split_indices",
]


def canonicalize_name(name: str) -> str:
    """Trim, collapse internal whitespace runs to one underscore, lowercase."""
    return "_".join(name.split()).lower()


@dataclass(frozen=True)
class LabelMap:
    """Bijection between class names and dense indices 0..n_classes-1.

    Names are canonicalized and ordered lexicographically, so the mapping is
    deterministic across runs regardless of row order in the source file.
    """

    class_names: tuple[str, ...]
    index_of: dict[str, int] = field(compare=False)

    @classmethod
    def from_names(cls, names) -> "LabelMap":
        ordered = tuple(sorted({canonicalize_name(n) for n in names}))
        return cls(ordered, {name: i for i, name in enumerate(ordered)})

    def __len__(self) -> int:
        return len(self.class_names)

    def encode(self, name: str) -> int:
        return self.index_of[canonicalize_name(name)]

    def decode(self, index: int) -> str:
        return self.class_names[index]

    def to_dict(self) -> dict:
        return {"class_names": list(self.class_names)}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelMap":
        names = tuple(d["class_names"])
        return cls(names, {name: i for i, name in enumerate(names)})


@dataclass
class Dataset:
    """Feature matrix plus aligned labels and the label map."""

    features: np.ndarray
    feature_names: list[str]
    labels: np.ndarray
    label_map: LabelMap

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D")
        self.labels = as_int_labels(self.labels, "labels")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"features have {self.features.shape[0]} rows but "
                f"{self.labels.shape[0]} labels"
            )
        if self.features.shape[1] != len(self.feature_names):
            raise ValueError(
                f"features have {self.features.shape[1]} columns but "
                f"{len(self.feature_names)} names"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names are not unique")
        if self.labels.size and self.labels.max() >= len(self.label_map):
            raise ValueError("label index out of range of label map")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_cols(self) -> int:
        return self.features.shape[1]

    def subset_rows(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx], list(self.feature_names), self.labels[idx], self.label_map
        )

    def with_features(self, features, feature_names) -> "Dataset":
        return Dataset(np.asarray(features), list(feature_names), self.labels, self.label_map)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "features": self.features.tolist(),
            "labels": self.labels.tolist(),
            "label_map": self.label_map.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(
            np.asarray(d["features"], dtype=np.float64).reshape(
                len(d["labels"]), len(d["feature_names"])
            ),
            list(d["feature_names"]),
            np.asarray(d["labels"], dtype=np.int64),
            LabelMap.from_dict(d["label_map"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str) -> "Dataset":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class CleanReport:
    rows_dropped_null: int = 0
    rows_dropped_nonfinite: int = 0
    columns_dropped_constant: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_dropped_null": self.rows_dropped_null,
            "rows_dropped_nonfinite": self.rows_dropped_nonfinite,
            "columns_dropped_constant": list(self.columns_dropped_constant),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test partition parameters.

    ``validation_fraction`` is taken from the training portion that remains
    after the test rows are removed.
    """

    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in [0,1), got {self.validation_fraction}"
            )


def load_csv(path: str, label_column: str = "Label") -> Dataset:
    """Load a header-first CSV into a Dataset.

    Column names are canonicalized; non-label cells that fail to parse as a
    float become NaN so that clean() can drop the row. The label column holds
    class names, mapped to indices in lexicographic order.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        names = [canonicalize_name(c) for c in header]
        wanted = canonicalize_name(label_column)
        if wanted not in names:
            raise DataError(f"label column '{label_column}' not found in header")
        label_idx = names.index(wanted)
        feature_names = [n for i, n in enumerate(names) if i != label_idx]
        if len(set(feature_names)) != len(feature_names):
            raise DataError("duplicate feature names after canonicalization")

        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(
                    f"row {line_no}: expected {len(header)} fields, got {len(record)}"
                )
            values = []
            for i, cell in enumerate(record):
                if i == label_idx:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    values.append(math.nan)
            rows.append(values)
            raw_labels.append(record[label_idx])

    label_map = LabelMap.from_names(raw_labels) if raw_labels else LabelMap.from_names([])
    labels = np.array([label_map.encode(s) for s in raw_labels], dtype=np.int64)
    features = (
        np.array(rows, dtype=np.float64)
        if rows
        else np.empty((0, len(feature_names)), dtype=np.float64)
    )
    return Dataset(features, feature_names, labels, label_map)


def clean(d: Dataset) -> tuple[Dataset, CleanReport]:
    """Drop rows with missing/non-finite values and constant columns.

    A row with any NaN counts as a null drop; a NaN-free row with an infinity
    counts as a non-finite drop. Columns are scanned after the row drops, so
    a column that becomes constant is removed too. Idempotent.
    """
    X = d.features
    has_nan = np.isnan(X).any(axis=1) if X.size else np.zeros(d.n_rows, dtype=bool)
    has_inf = np.isinf(X).any(axis=1) if X.size else np.zeros(d.n_rows, dtype=bool)
    keep_rows = ~(has_nan | has_inf)

    report = CleanReport(
        rows_dropped_null=int(has_nan.sum()),
        rows_dropped_nonfinite=int((has_inf & ~has_nan).sum()),
    )
    X = X[keep_rows]
    labels = d.labels[keep_rows]
    if X.shape[0] == 0:
        raise DataError("empty after cleaning")

    keep_cols = []
    for j, name in enumerate(d.feature_names):
        col = X[:, j]
        # a single surviving row makes every column trivially constant; only
        # multi-row constancy marks a truly uninformative column
        if X.shape[0] > 1 and np.all(col == col[0]):
            report.columns_dropped_constant.append(name)
        else:
            keep_cols.append(j)
    names = [d.feature_names[j] for j in keep_cols]
    cleaned = Dataset(X[:, keep_cols], names, labels, d.label_map)
    return cleaned, report


def one_hot(labels, n_classes: int) -> np.ndarray:
    """Encode integer labels as one-hot float rows."""
    y = as_int_labels(labels, "labels")
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if y.size and y.max() >= n_classes:
        raise ValueError(f"label {int(y.max())} out of range for {n_classes} classes")
    out = np.zeros((y.shape[0], n_classes), dtype=np.float64)
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def _partition_sizes(n: int, test_fraction: float, validation_fraction: float) -> tuple[int, int]:
    n_test = int(round(test_fraction * n))
    n_val = int(round(validation_fraction * (n - n_test)))
    return n_test, n_val


def split_indices(
    labels, label_map: LabelMap, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-index partition (train, validation, test) for the given spec.

    Each returned index array is sorted ascending, so subsetting preserves
    source row order. Identical spec (including seed) gives an identical
    partition.
    """
    y = as_int_labels(labels, "labels")
    n = y.shape[0]
    rng = np.random.default_rng(spec.seed)
    train_parts, val_parts, test_parts = [], [], []

    if spec.stratified:
        for c in range(len(label_map)):
            idx = np.flatnonzero(y == c)
            if idx.size == 1:
                raise DataError(
                    f"class '{label_map.decode(c)}' has only 1 row; "
                    "stratified split impossible"
                )
            if idx.size == 0:
                continue
            perm = rng.permutation(idx)
            n_test, n_val = _partition_sizes(
                idx.size, spec.test_fraction, spec.validation_fraction
            )
            test_parts.append(perm[:n_test])
            val_parts.append(perm[n_test : n_test + n_val])
            train_parts.append(perm[n_test + n_val :])
    else:
        perm = rng.permutation(n)
        n_test, n_val = _partition_sizes(n, spec.test_fraction, spec.validation_fraction)
        test_parts.append(perm[:n_test])
        val_parts.append(perm[n_test : n_test + n_val])
        train_parts.append(perm[n_test + n_val :])

    def _gather(parts):
        joined = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        return np.sort(joined).astype(np.int64)

    return _gather(train_parts), _gather(val_parts), _gather(test_parts)


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Partition a dataset into (train, validation, test) per the spec."""
    train_idx, val_idx, test_idx = split_indices(d.labels, d.label_map, spec)
    return d.subset_rows(train_idx), d.subset_rows(val_idx), d.subset_rows(test_idx)
