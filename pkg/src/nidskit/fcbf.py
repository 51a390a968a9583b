"""Fast Correlation-Based Filter feature selection.

Relevance and redundancy are both measured with symmetrical uncertainty
SU(X,Y) = 2*IG(X;Y) / (H(X) + H(Y)), computed from plug-in (empirical)
entropies in bits. Continuous features are discretized into equal-width
bins first.

Selection walks the features in descending SU-with-class order, keeps a
feature when its SU exceeds the threshold, and then discards every
remaining feature g dominated by the kept feature f, i.e. with
SU(f,g) >= SU(g,class).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .validation import as_float_1d, as_float_2d, as_int_labels, check_consistent_rows, check_finite

__all__ = [
    "SuScore",
    "FeatureSubset",
    "discretize_equal_width",
    "entropy_bits",
    "symmetrical_uncertainty",
    "fcbf_select",
    "FcbfSelector",
]

DEFAULT_THRESHOLD = 0.01
DEFAULT_BINS = 10


@dataclass(frozen=True)
class SuScore:
    feature_index: int
    su_with_class: float


@dataclass
class FeatureSubset:
    """Outcome of a selection run, ordered by descending SU with the class."""

    selected_indices: list[int]
    selected_names: list[str]
    scores: list[SuScore]
    threshold: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "threshold": self.threshold,
                "selected": [
                    {"index": s.feature_index, "name": n, "su": s.su_with_class}
                    for s, n in zip(self.scores, self.selected_names)
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureSubset":
        d = json.loads(text)
        entries = d["selected"]
        return cls(
            [e["index"] for e in entries],
            [e["name"] for e in entries],
            [SuScore(e["index"], e["su"]) for e in entries],
            d["threshold"],
        )


def discretize_equal_width(column, n_bins: int) -> np.ndarray:
    """Map a finite column to bin indices 0..n_bins-1 over [min, max].

    Constant columns map to all zeros; the maximum value goes to the last bin.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    x = as_float_1d(column, "column")
    check_finite(x, "column")
    lo, hi = x.min(), x.max()
    if lo == hi:
        return np.zeros(x.shape[0], dtype=np.int64)
    idx = ((x - lo) / (hi - lo) * n_bins).astype(np.int64)
    return np.minimum(idx, n_bins - 1)


def entropy_bits(values) -> float:
    """Plug-in Shannon entropy in bits of an integer-coded variable."""
    v = np.asarray(values)
    if v.size == 0:
        raise ValueError("entropy of an empty sequence is undefined")
    _, counts = np.unique(v, return_counts=True)
    p = counts / v.size
    return float(-(p * np.log2(p)).sum())


def symmetrical_uncertainty(x, y) -> float:
    """SU(x, y) in [0, 1]; 0 when both variables are constant."""
    xv = np.asarray(x)
    yv = np.asarray(y)
    if xv.shape[0] != yv.shape[0]:
        raise ValueError(f"length mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    if xv.size == 0:
        raise ValueError("symmetrical uncertainty of empty sequences is undefined")
    hx = entropy_bits(xv)
    hy = entropy_bits(yv)
    if hx + hy == 0.0:
        return 0.0
    # joint entropy from pair codes
    _, xi = np.unique(xv, return_inverse=True)
    _, yi = np.unique(yv, return_inverse=True)
    pair = xi.astype(np.int64) * (yi.max() + 1) + yi
    hxy = entropy_bits(pair)
    ig = hx + hy - hxy
    su = 2.0 * ig / (hx + hy)
    return float(min(max(su, 0.0), 1.0))


def fcbf_select(features, labels, threshold: float, feature_names=None) -> FeatureSubset:
    """Run the selection walk on already-discretized features.

    Ties in the initial descending sort break toward the lower column index,
    making the outcome deterministic.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    X = as_float_2d(features)
    y = as_int_labels(labels, "labels")
    check_consistent_rows(X, y)
    n_cols = X.shape[1]
    names = list(feature_names) if feature_names is not None else [
        f"col_{j}" for j in range(n_cols)
    ]

    su_class = np.array([symmetrical_uncertainty(X[:, j], y) for j in range(n_cols)])
    order = sorted(range(n_cols), key=lambda j: (-su_class[j], j))

    kept: list[int] = []
    remaining = list(order)
    while remaining:
        f = remaining.pop(0)
        if su_class[f] <= threshold:
            # sorted descending: nothing after f can pass either
            break
        kept.append(f)
        survivors = []
        for g in remaining:
            if symmetrical_uncertainty(X[:, f], X[:, g]) >= su_class[g]:
                continue
            survivors.append(g)
        remaining = survivors

    return FeatureSubset(
        selected_indices=kept,
        selected_names=[names[j] for j in kept],
        scores=[SuScore(j, float(su_class[j])) for j in kept],
        threshold=float(threshold),
    )


class FcbfSelector(BaseEstimator, TransformerMixin):
    """Discretize columns, run FCBF against the labels, and select columns.

    transform() returns the selected columns ordered by descending SU with
    the class, matching the serialized FeatureSubset.
    """

    def __init__(self, threshold: float = DEFAULT_THRESHOLD, n_bins: int = DEFAULT_BINS):
        self.threshold = threshold
        self.n_bins = n_bins

    def fit(self, X, y, feature_names=None):
        X = as_float_2d(X)
        disc = np.column_stack(
            [discretize_equal_width(X[:, j], self.n_bins) for j in range(X.shape[1])]
        ) if X.shape[1] else X
        self.subset_ = fcbf_select(disc, y, self.threshold, feature_names)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "subset_"):
            raise NotFittedError("FcbfSelector is not fitted")
        X = as_float_2d(X)
        return X[:, self.subset_.selected_indices]

    def get_support(self) -> np.ndarray:
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.subset_.selected_indices] = True
        return mask
