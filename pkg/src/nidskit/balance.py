"""Class rebalancing: K-means clustering combined with per-cluster SMOTE.

The dataset is clustered once, each minority class's deficit is apportioned
across clusters proportionally to where that class lives, and SMOTE runs
inside each cluster so synthetic rows respect local structure. Original rows
pass through untouched; synthetic rows are appended after them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import Dataset
from .errors import DataError
from .seeding import derive_seed
from .validation import as_float_2d, as_int_labels, check_consistent_rows, check_finite

__all__ = [
    "Clustering",
    "BalanceConfig",
    "BalanceReport",
    "kmeans",
    "smote_oversample",
    "balance_dataset",
    "balance_arrays",
    "KMeansSmote",
]

_MAX_LLOYD_ITERATIONS = 300


@dataclass
class Clustering:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    iterations_run: int
    inertia_history: list[float] = field(default_factory=list)


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) matrix of squared euclidean distances
    diff = X[:, None, :] - centroids[None, :, :]
    return (diff**2).sum(axis=2)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    first = int(rng.integers(0, n))
    centroids[0] = X[first]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total == 0:
            choice = int(rng.integers(0, n))
        else:
            choice = int(rng.choice(n, p=closest / total))
        centroids[i] = X[choice]
        closest = np.minimum(closest, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(features, k: int, seed: int = 0) -> Clustering:
    """Lloyd iterations with k-means++ seeding and euclidean distance.

    Stops when the assignment no longer changes (or after 300 iterations).
    An emptied cluster is reseeded to the point currently farthest from its
    assigned centroid.
    """
    X = as_float_2d(features)
    check_finite(X, "features")
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"cannot form {k} clusters from {n} rows")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    assignment = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    iterations = 0

    for iterations in range(1, _MAX_LLOYD_ITERATIONS + 1):
        d2 = _squared_distances(X, centroids)
        new_assignment = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), new_assignment]

        for c in range(k):
            if not np.any(new_assignment == c):
                farthest = int(point_d2.argmax())
                centroids[c] = X[farthest]
                new_assignment[farthest] = c
                point_d2[farthest] = 0.0

        history.append(float(point_d2.sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(k):
            centroids[c] = X[assignment == c].mean(axis=0)

    d2 = _squared_distances(X, centroids)
    inertia = float(d2[np.arange(n), assignment].sum())
    return Clustering(centroids, assignment, inertia, iterations, history)


def smote_oversample(
    minority, n_synthetic: int, k_neighbors: int = 5, seed: int = 0
) -> np.ndarray:
    """Generate synthetic rows as convex combinations of neighbors.

    Per synthetic row the seeded generator draws, in order: a base row p, one
    of p's min(k_neighbors, m-1) nearest neighbors q, and u ~ U[0,1); the row
    is p + u*(q - p). A single-row minority falls back to duplication.
    """
    X = as_float_2d(minority)
    if X.shape[0] < 1:
        raise ValueError("minority set must have at least 1 row")
    if n_synthetic < 0:
        raise ValueError("n_synthetic must be >= 0")
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    m = X.shape[0]
    rng = np.random.default_rng(seed)
    if n_synthetic == 0:
        return np.empty((0, X.shape[1]))
    if m == 1:
        return np.repeat(X, n_synthetic, axis=0)

    k_eff = min(k_neighbors, m - 1)
    d2 = _squared_distances(X, X)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps neighbor choice deterministic under distance ties
    neighbor_table = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]

    out = np.empty((n_synthetic, X.shape[1]))
    for i in range(n_synthetic):
        p = int(rng.integers(0, m))
        q = int(neighbor_table[p, int(rng.integers(0, k_eff))])
        u = float(rng.random())
        out[i] = X[p] + u * (X[q] - X[p])
    return out


def apportion_largest_remainder(total: int, weights) -> list[int]:
    """Split ``total`` into integer quotas proportional to ``weights``.

    Uses largest-remainder rounding so the quotas sum to ``total`` exactly;
    remainder ties break toward the lower index. Zero-weight entries never
    receive a quota.
    """
    w = np.asarray(weights, dtype=np.float64)
    if total < 0:
        raise ValueError("total must be >= 0")
    s = w.sum()
    if total == 0:
        return [0] * len(w)
    if s <= 0:
        raise ValueError("weights must sum to a positive value")
    exact = total * w / s
    base = np.floor(exact).astype(np.int64)
    leftover = total - int(base.sum())
    remainders = exact - base
    order = sorted(range(len(w)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        base[i] += 1
    return base.tolist()


@dataclass(frozen=True)
class BalanceConfig:
    """Knobs for balance_dataset; k defaults to the number of classes."""

    k: int | None = None
    smote_k_neighbors: int = 5
    target_policy: str = "match_majority"
    factor: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.smote_k_neighbors < 1:
            raise ValueError("smote_k_neighbors must be >= 1")
        if self.target_policy not in ("match_majority", "explicit_factor"):
            raise ValueError(f"unknown target_policy: {self.target_policy}")
        if self.target_policy == "explicit_factor":
            if self.factor is None or self.factor < 1.0:
                raise ValueError("explicit_factor needs factor >= 1.0")


@dataclass
class BalanceReport:
    class_counts_before: dict[str, int]
    class_counts_after: dict[str, int]
    synthetic_per_cluster: list[int]
    k: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "class_counts_before": self.class_counts_before,
                "class_counts_after": self.class_counts_after,
                "synthetic_per_cluster": self.synthetic_per_cluster,
                "k": self.k,
                "seed": self.seed,
            },
            sort_keys=True,
        )


def balance_arrays(
    X, y, n_classes: int, cfg: BalanceConfig, class_names=None
) -> tuple[np.ndarray, np.ndarray, BalanceReport]:
    """Array-level core of balance_dataset; see that function for semantics."""
    X = as_float_2d(X)
    y = as_int_labels(y, "labels")
    check_consistent_rows(X, y)
    check_finite(X, "features")
    counts = np.bincount(y, minlength=n_classes)
    present = np.flatnonzero(counts)
    if present.size < 2:
        raise DataError("balancing needs at least 2 classes present")
    names = list(class_names) if class_names is not None else [
        str(c) for c in range(n_classes)
    ]

    if cfg.k is not None:
        k = cfg.k  # kmeans rejects k > rows
    else:
        k = min(int(present.size), X.shape[0])
    clustering = kmeans(X, k, seed=cfg.seed)
    majority = int(counts.argmax())

    synthetic_rows: list[np.ndarray] = []
    synthetic_labels: list[np.ndarray] = []
    per_cluster = [0] * k

    for c in range(n_classes):
        if counts[c] == 0 or c == majority:
            continue
        if cfg.target_policy == "match_majority":
            deficit = int(counts[majority] - counts[c])
        else:
            deficit = int(np.ceil((cfg.factor - 1.0) * counts[c]))
        if deficit <= 0:
            continue
        in_cluster = [
            np.flatnonzero((clustering.assignment == cl) & (y == c)) for cl in range(k)
        ]
        weights = [idx.size for idx in in_cluster]
        quotas = apportion_largest_remainder(deficit, weights)
        for cl in range(k):
            if quotas[cl] == 0:
                continue
            members = X[in_cluster[cl]]
            child = derive_seed(cfg.seed, cl, c)
            new_rows = smote_oversample(
                members, quotas[cl], cfg.smote_k_neighbors, seed=child
            )
            synthetic_rows.append(new_rows)
            synthetic_labels.append(np.full(quotas[cl], c, dtype=np.int64))
            per_cluster[cl] += quotas[cl]

    if synthetic_rows:
        X_out = np.vstack([X] + synthetic_rows)
        y_out = np.concatenate([y] + synthetic_labels)
    else:
        X_out, y_out = X.copy(), y.copy()

    after = np.bincount(y_out, minlength=n_classes)
    report = BalanceReport(
        class_counts_before={names[c]: int(counts[c]) for c in range(n_classes)},
        class_counts_after={names[c]: int(after[c]) for c in range(n_classes)},
        synthetic_per_cluster=per_cluster,
        k=k,
        seed=cfg.seed,
    )
    return X_out, y_out, report


def balance_dataset(d: Dataset, cfg: BalanceConfig) -> tuple[Dataset, BalanceReport]:
    """Cluster the rows, then oversample every non-majority class.

    Under ``match_majority`` each class is raised exactly to the majority
    count; under ``explicit_factor`` each non-majority class gains
    ceil((N-1) * count) rows. Deficits are apportioned across clusters
    proportionally to the class's per-cluster membership (largest-remainder
    rounding), and each (cluster, class) SMOTE run gets its own derived seed,
    so results are deterministic and order-independent.
    """
    X_out, y_out, report = balance_arrays(
        d.features,
        d.labels,
        len(d.label_map),
        cfg,
        class_names=list(d.label_map.class_names),
    )
    return Dataset(X_out, list(d.feature_names), y_out, d.label_map), report


class KMeansSmote(BaseEstimator):
    """Resampler with an imblearn-style fit_resample(X, y) surface."""

    def __init__(
        self,
        k: int | None = None,
        smote_k_neighbors: int = 5,
        target_policy: str = "match_majority",
        factor: float | None = None,
        seed: int = 0,
    ):
        self.k = k
        self.smote_k_neighbors = smote_k_neighbors
        self.target_policy = target_policy
        self.factor = factor
        self.seed = seed

    def fit_resample(self, X, y):
        y = as_int_labels(y, "y")
        n_classes = int(y.max()) + 1 if y.size else 0
        cfg = BalanceConfig(
            k=self.k,
            smote_k_neighbors=self.smote_k_neighbors,
            target_policy=self.target_policy,
            factor=self.factor,
            seed=self.seed,
        )
        X_out, y_out, report = balance_arrays(X, y, n_classes, cfg)
        self.report_ = report
        return X_out, y_out
