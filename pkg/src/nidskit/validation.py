"""Small input-validation helpers used by the estimators and free functions."""

import numpy as np

from .errors import DataError


def as_float_2d(X, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got ndim={arr.ndim}")
    return arr


def as_float_1d(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    return arr


def as_int_labels(y, name: str = "y") -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(arr, dtype=np.float64)):
            raise ValueError(f"{name} must contain integer class labels")
        arr = rounded
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ValueError(f"{name} contains negative labels")
    return arr


def check_finite(X: np.ndarray, name: str = "X") -> None:
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains non-finite values")


def check_consistent_rows(X: np.ndarray, y: np.ndarray) -> None:
    if X.shape[0] != y.shape[0]:
        raise ValueError(
            f"row count mismatch: features have {X.shape[0]} rows, labels {y.shape[0]}"
        )


def check_n_columns(X: np.ndarray, expected: int, name: str = "X") -> None:
    if X.shape[1] != expected:
        raise ValueError(
            f"{name} has {X.shape[1]} columns, expected {expected}"
        )
