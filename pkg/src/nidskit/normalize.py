"""Min-max scaling into [0,1] plus Pearson correlation and histogram helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .validation import as_float_1d, as_float_2d, check_finite, check_n_columns

__all__ = [
    "NormStats",
    "fit_minmax",
    "apply_minmax",
    "MinMaxNormalizer",
    "CorrelationMatrix",
    "pearson_correlation",
    "histogram",
]


@dataclass
class NormStats:
    """Per-column extrema fitted on training data."""

    column_names: list[str]
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if not (len(self.column_names) == self.mins.shape[0] == self.maxs.shape[0]):
            raise ValueError("column_names, mins, and maxs must have equal length")
        if np.any(self.mins > self.maxs):
            raise ValueError("mins must be <= maxs")

    def to_json(self) -> str:
        return json.dumps(
            {
                "columns": list(self.column_names),
                "mins": self.mins.tolist(),
                "maxs": self.maxs.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NormStats":
        d = json.loads(text)
        return cls(list(d["columns"]), np.asarray(d["mins"]), np.asarray(d["maxs"]))


def fit_minmax(features, column_names=None) -> NormStats:
    """Column-wise extrema of a finite feature matrix."""
    X = as_float_2d(features)
    if X.shape[0] == 0:
        raise ValueError("cannot fit min-max stats on an empty matrix")
    check_finite(X, "features")
    names = list(column_names) if column_names is not None else [
        f"col_{j}" for j in range(X.shape[1])
    ]
    return NormStats(names, X.min(axis=0), X.max(axis=0))


def apply_minmax(features, stats: NormStats) -> np.ndarray:
    """Scale columns to [0,1] via (x - min)/(max - min).

    Values outside the fitted range (possible on held-out data) are clamped
    to [0,1]; constant fitted columns map to 0.0.
    """
    X = as_float_2d(features)
    check_n_columns(X, stats.mins.shape[0], "features")
    span = stats.maxs - stats.mins
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    out = (X - stats.mins) / safe_span
    out[:, constant] = 0.0
    return np.clip(out, 0.0, 1.0)


class MinMaxNormalizer(BaseEstimator, TransformerMixin):
    """Sklearn-style wrapper around fit_minmax / apply_minmax."""

    def fit(self, X, y=None):
        self.stats_ = fit_minmax(X)
        return self

    def transform(self, X):
        if not hasattr(self, "stats_"):
            raise NotFittedError("MinMaxNormalizer is not fitted")
        return apply_minmax(X, self.stats_)


@dataclass
class CorrelationMatrix:
    values: np.ndarray
    column_names: list[str]


def pearson_correlation(features, column_names=None) -> CorrelationMatrix:
    """Sample Pearson correlation between every pair of columns.

    Zero-variance columns get 0.0 everywhere, including their diagonal entry
    (they carry no correlation information).
    """
    X = as_float_2d(features)
    if X.shape[0] < 2:
        raise ValueError("pearson correlation needs at least 2 rows")
    check_finite(X, "features")
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    degenerate = norms == 0
    safe = np.where(degenerate, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.clip(corr, -1.0, 1.0, out=corr)
    # exact symmetry and exact unit diagonal despite float round-off
    corr = (corr + corr.T) / 2.0
    corr[np.diag_indices_from(corr)] = np.where(degenerate, 0.0, 1.0)
    names = list(column_names) if column_names is not None else [
        f"col_{j}" for j in range(X.shape[1])
    ]
    return CorrelationMatrix(corr, names)


def histogram(column, n_bins: int) -> list[tuple[float, float, int]]:
    """Equal-width histogram over [min, max] as (lower, upper, count) bins.

    The maximum value lands in the last bin; a constant column collapses to a
    single point bin. Counts always sum to the input length.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    x = as_float_1d(column, "column")
    check_finite(x, "column")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return [(lo, hi, int(x.size))]
    width = (hi - lo) / n_bins
    idx = np.minimum(((x - lo) / width).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return [
        (lo + i * width, hi if i == n_bins - 1 else lo + (i + 1) * width, int(counts[i]))
        for i in range(n_bins)
    ]
