"""Dimensionality reduction via covariance eigendecomposition.

The symmetric eigenproblem is solved with cyclic Jacobi sweeps (fixed sweep
order, so results are bit-reproducible) rather than an SVD of the data
matrix. Components follow the sign convention that each eigenvector's
largest-magnitude entry is positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .validation import as_float_2d, check_finite, check_n_columns

__all__ = [
    "PcaModel",
    "jacobi_eigh",
    "fit_pca",
    "transform",
    "inverse_transform",
    "PrincipalComponents",
]

DEFAULT_VARIANCE_FRACTION = 0.95
_JACOBI_TOL = 1e-10
_MAX_SWEEPS = 100


def jacobi_eigh(matrix, tol: float = _JACOBI_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Sweeps rotate out each upper-triangle entry in a fixed (p, q) order until
    every off-diagonal magnitude falls below ``tol``. Returns (eigenvalues,
    vectors) with vectors in columns, unsorted.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v

    for _ in range(_MAX_SWEEPS):
        off = np.abs(a - np.diag(np.diag(a))).max()
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                vec_p = c * v[:, p] - s * v[:, q]
                vec_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vec_p, vec_q
    return np.diag(a).copy(), v


@dataclass
class PcaModel:
    """Fitted projection: column means, kept components, full spectrum."""

    mean: np.ndarray
    components: np.ndarray  # (n_components, n_cols), rows orthonormal
    eigenvalues: np.ndarray  # all n_cols values, descending
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_cols(self) -> int:
        return self.components.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean.tolist(),
                "components": self.components.tolist(),
                "eigenvalues": self.eigenvalues.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PcaModel":
        d = json.loads(text)
        eig = np.asarray(d["eigenvalues"], dtype=np.float64)
        total = eig.sum()
        ratio = eig / total if total > 0 else np.zeros_like(eig)
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["components"], dtype=np.float64),
            eig,
            ratio,
        )


def fit_pca(
    features,
    n_components: int | None = None,
    variance_fraction: float | None = None,
) -> PcaModel:
    """Fit a PCA model on finite data with >= 2 rows.

    Exactly one of ``n_components`` / ``variance_fraction`` applies; when
    neither is given, variance_fraction defaults to 0.95. The covariance uses
    1/(n-1) normalization; with a fraction target the smallest k whose
    cumulative explained-variance ratio reaches the fraction is kept.
    """
    X = as_float_2d(features)
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least 2 rows")
    check_finite(X, "features")
    if n_components is not None and variance_fraction is not None:
        raise ValueError("give n_components or variance_fraction, not both")
    if n_components is not None and not 1 <= n_components <= X.shape[1]:
        raise ValueError(
            f"n_components must be in [1, {X.shape[1]}], got {n_components}"
        )
    if variance_fraction is None and n_components is None:
        variance_fraction = DEFAULT_VARIANCE_FRACTION
    if variance_fraction is not None and not 0.0 < variance_fraction <= 1.0:
        raise ValueError(f"variance_fraction must be in (0,1], got {variance_fraction}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    vectors = eigvecs[:, order].T  # rows are eigenvectors

    # sign convention: largest-|entry| coordinate positive
    for i in range(vectors.shape[0]):
        j = int(np.argmax(np.abs(vectors[i])))
        if vectors[i, j] < 0:
            vectors[i] = -vectors[i]

    total = eigvals.sum()
    ratio = eigvals / total if total > 0 else np.zeros_like(eigvals)
    if n_components is None:
        cumulative = np.cumsum(eigvals)
        target = variance_fraction * total
        k = int(np.searchsorted(cumulative, target - 1e-12)) + 1
        k = min(max(k, 1), X.shape[1])
    else:
        k = n_components

    return PcaModel(mean, vectors[:k], eigvals, ratio)


def transform(features, model: PcaModel) -> np.ndarray:
    """Project rows onto the component space: (X - mean) @ components.T."""
    X = as_float_2d(features)
    check_n_columns(X, model.n_cols, "features")
    return (X - model.mean) @ model.components.T


def inverse_transform(scores, model: PcaModel) -> np.ndarray:
    """Reconstruct rows from component scores: scores @ components + mean."""
    S = as_float_2d(scores)
    check_n_columns(S, model.n_components, "scores")
    return S @ model.components + model.mean


class PrincipalComponents(BaseEstimator, TransformerMixin):
    """Sklearn-style wrapper around fit_pca/transform/inverse_transform."""

    def __init__(self, n_components: int | None = None, variance_fraction: float | None = None):
        self.n_components = n_components
        self.variance_fraction = variance_fraction

    def fit(self, X, y=None):
        self.model_ = fit_pca(X, self.n_components, self.variance_fraction)
        self.components_ = self.model_.components
        self.mean_ = self.model_.mean
        self.eigenvalues_ = self.model_.eigenvalues
        self.explained_variance_ratio_ = self.model_.explained_variance_ratio
        return self

    def transform(self, X):
        self._check_fitted()
        return transform(X, self.model_)

    def inverse_transform(self, S):
        self._check_fitted()
        return inverse_transform(S, self.model_)

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("PrincipalComponents is not fitted")
