"""Random forest of CART trees with Gini splits and bootstrap sampling.

Trees are grown on bootstrap samples (with replacement, same size as the
training set); each node evaluates a random feature subset and every
midpoint threshold of each candidate feature, keeping the split with the
largest Gini impurity reduction. Leaves store class-count distributions and
prediction averages them across trees.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ..validation import as_float_2d, as_int_labels, check_consistent_rows, check_finite

__all__ = ["RandomForestModel"]

_MIN_IMPURITY_DECREASE = 1e-12


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    distribution: np.ndarray | None = None  # set on leaves

    @property
    def is_leaf(self) -> bool:
        return self.distribution is not None


def _n_split_features(mode, n_features: int) -> int:
    if mode == "sqrt":
        return max(1, int(np.floor(np.sqrt(n_features))))
    if mode == "log2":
        return max(1, int(np.floor(np.log2(n_features))) if n_features > 1 else 1)
    if mode == "all":
        return n_features
    raise ValueError(f"features_per_split must be sqrt|log2|all, got {mode!r}")


def _best_split_for_feature(values: np.ndarray, y: np.ndarray, n_classes: int):
    """Best (weighted child impurity, threshold) over all midpoints, or None."""
    order = np.argsort(values, kind="stable")
    xs = values[order]
    if xs[0] == xs[-1]:
        return None
    ys = y[order]
    n = xs.shape[0]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    left_counts = np.cumsum(onehot, axis=0)[:-1]  # counts left of each boundary
    total = left_counts[-1] + onehot[-1]
    right_counts = total - left_counts
    n_left = np.arange(1, n)
    n_right = n - n_left
    left_term = n_left - (left_counts**2).sum(axis=1) / n_left
    right_term = n_right - (right_counts**2).sum(axis=1) / n_right
    weighted = (left_term + right_term) / n
    valid = xs[:-1] < xs[1:]
    weighted = np.where(valid, weighted, np.inf)
    best = int(weighted.argmin())
    if not np.isfinite(weighted[best]):
        return None
    threshold = (xs[best] + xs[best + 1]) / 2.0
    return float(weighted[best]), threshold


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts / total
    return float(1.0 - (p**2).sum())


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_depth: int | None,
    min_samples_split: int,
    m_try: int,
) -> _Node:
    def leaf(idx: np.ndarray) -> _Node:
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        return _Node(distribution=counts / counts.sum())

    def build(idx: np.ndarray, depth: int) -> _Node:
        counts = np.bincount(y[idx], minlength=n_classes)
        if (
            idx.size < min_samples_split
            or (max_depth is not None and depth >= max_depth)
            or np.count_nonzero(counts) == 1
        ):
            return leaf(idx)
        features = rng.choice(X.shape[1], size=m_try, replace=False)
        parent = _gini(counts.astype(np.float64))
        best = None
        for f in features:
            found = _best_split_for_feature(X[idx, f], y[idx], n_classes)
            if found is None:
                continue
            weighted, threshold = found
            if best is None or weighted < best[0]:
                best = (weighted, int(f), threshold)
        if best is None or parent - best[0] <= _MIN_IMPURITY_DECREASE:
            return leaf(idx)
        _, f, threshold = best
        mask = X[idx, f] < threshold
        return _Node(
            feature=f,
            threshold=threshold,
            left=build(idx[mask], depth + 1),
            right=build(idx[~mask], depth + 1),
        )

    return build(np.arange(X.shape[0]), 0)


def _tree_proba(node: _Node, X: np.ndarray) -> np.ndarray:
    probe = node
    while not probe.is_leaf:
        probe = probe.left
    out = np.empty((X.shape[0], probe.distribution.shape[0]))

    def fill(nd: _Node, idx: np.ndarray):
        if nd.is_leaf:
            out[idx] = nd.distribution
            return
        mask = X[idx, nd.feature] < nd.threshold
        fill(nd.left, idx[mask])
        fill(nd.right, idx[~mask])

    fill(node, np.arange(X.shape[0]))
    return out


class RandomForestModel(BaseEstimator, ClassifierMixin):
    """Bootstrap-aggregated CART trees; deterministic given the seed.

    Each tree draws from its own child generator (spawned from the seed), so
    results do not depend on training order or thread count.
    """

    def __init__(
        self,
        n_trees: int = 30,
        max_depth: int | None = None,
        min_samples_split: int = 2,
        features_per_split: str = "sqrt",
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.features_per_split = features_per_split
        self.seed = seed

    def fit(self, X, y):
        X = as_float_2d(X)
        y = as_int_labels(y, "y")
        check_consistent_rows(X, y)
        check_finite(X, "X")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if X.shape[0] < 2 or np.unique(y).size < 2:
            raise ValueError("training needs >= 2 rows and >= 2 classes")

        start = time.perf_counter()
        n_classes = int(y.max()) + 1
        m_try = _n_split_features(self.features_per_split, X.shape[1])
        seq = np.random.SeedSequence(self.seed)
        self.trees_ = []
        for child in seq.spawn(self.n_trees):
            rng = np.random.default_rng(child)
            sample = rng.integers(0, X.shape[0], size=X.shape[0])
            self.trees_.append(
                _grow_tree(
                    X[sample],
                    y[sample],
                    n_classes,
                    rng,
                    self.max_depth,
                    self.min_samples_split,
                    m_try,
                )
            )
        self.n_classes_ = n_classes
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        self.train_seconds_ = time.perf_counter() - start
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_float_2d(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}"
            )
        acc = np.zeros((X.shape[0], self.n_classes_))
        for tree in self.trees_:
            acc += _tree_proba(tree, X)
        return acc / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise NotFittedError("RandomForestModel is not fitted")

    # --- persistence -----------------------------------------------------

    def _tree_to_dict(self, node: _Node) -> dict:
        if node.is_leaf:
            return {"leaf": node.distribution.tolist()}
        return {
            "feature": node.feature,
            "threshold": node.threshold,
            "left": self._tree_to_dict(node.left),
            "right": self._tree_to_dict(node.right),
        }

    @staticmethod
    def _tree_from_dict(d: dict) -> _Node:
        if "leaf" in d:
            return _Node(distribution=np.asarray(d["leaf"], dtype=np.float64))
        return _Node(
            feature=d["feature"],
            threshold=d["threshold"],
            left=RandomForestModel._tree_from_dict(d["left"]),
            right=RandomForestModel._tree_from_dict(d["right"]),
        )

    def weights_to_dict(self) -> dict:
        self._check_fitted()
        return {
            "trees": [self._tree_to_dict(t) for t in self.trees_],
            "n_classes": self.n_classes_,
            "n_features_in": self.n_features_in_,
        }

    def weights_from_dict(self, d: dict) -> "RandomForestModel":
        self.trees_ = [self._tree_from_dict(t) for t in d["trees"]]
        self.n_classes_ = d["n_classes"]
        self.classes_ = np.arange(self.n_classes_)
        self.n_features_in_ = d["n_features_in"]
        self.train_seconds_ = 0.0
        return self
