import json

import numpy as np
import pytest

from nidskit.balance import (
    BalanceConfig,
    KMeansSmote,
    apportion_largest_remainder,
    balance_arrays,
    balance_dataset,
    kmeans,
    smote_oversample,
)
from nidskit.dataset import Dataset, LabelMap
from nidskit.errors import DataError


def blobs(seed=0, n1=40, n2=50, offset=10.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 0.3, (n1, 2))
    b = rng.normal(offset, 0.3, (n2, 2))
    return np.vstack([a, b]), np.array([0] * n1 + [1] * n2)


class TestKmeans:
    def test_k1_centroid_is_mean(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 3))
        cl = kmeans(X, 1, seed=0)
        assert np.allclose(cl.centroids[0], X.mean(axis=0))
        assert np.isclose(cl.inertia, X.var(axis=0).sum() * X.shape[0])

    def test_separated_blobs(self):
        X, truth = blobs()
        cl = kmeans(X, 2, seed=3)
        # nearest-blob-center oracle: every row must sit with its blob
        centers = np.array([X[truth == 0].mean(axis=0), X[truth == 1].mean(axis=0)])
        oracle = np.argmin(
            ((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1
        )
        agreement = (cl.assignment == oracle).mean()
        assert agreement in (0.0, 1.0)  # up to cluster relabeling

    def test_k_equals_n(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(7, 2))
        cl = kmeans(X, 7, seed=0)
        assert cl.inertia == 0.0

    def test_inertia_non_increasing(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(200, 4))
        cl = kmeans(X, 6, seed=5)
        for a, b in zip(cl.inertia_history, cl.inertia_history[1:]):
            assert b <= a + 1e-9

    def test_centroid_is_mean_of_assigned(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(100, 3))
        cl = kmeans(X, 4, seed=7)
        for c in range(4):
            members = X[cl.assignment == c]
            assert members.shape[0] > 0
            assert np.allclose(cl.centroids[c], members.mean(axis=0), atol=1e-9)

    def test_determinism(self):
        X, _ = blobs(5)
        a = kmeans(X, 3, seed=11)
        b = kmeans(X, 3, seed=11)
        assert (a.assignment == b.assignment).all()
        assert (a.centroids == b.centroids).all()

    def test_duplicate_points_reseed_empty_clusters(self):
        X = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 5 + [[5.0, 5.0]])
        cl = kmeans(X, 3, seed=0)
        assert sorted(np.unique(cl.assignment).tolist()) == [0, 1, 2]

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((2, 2)), 3, seed=0)


class TestSmote:
    def test_segment_geometry(self):
        minority = np.array([[0.0, 0.0], [1.0, 1.0]])
        out = smote_oversample(minority, 25, 3, seed=5)
        assert out.shape == (25, 2)
        assert np.allclose(out[:, 0], out[:, 1])
        assert (out >= 0.0).all() and (out < 1.0 + 1e-12).all()

    def test_single_point_duplication(self):
        out = smote_oversample(np.array([[5.0, 5.0]]), 3, 5, seed=0)
        assert (out == 5.0).all() and out.shape == (3, 2)

    def test_square_corners_edges_only(self):
        corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        seed = 123
        out = smote_oversample(corners, 40, 1, seed=seed)

        # reference walk: replay the documented draw protocol with the same
        # generator and a brute-force neighbor table
        d2 = ((corners[:, None, :] - corners[None]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :1]
        rng = np.random.default_rng(seed)
        expected = np.empty((40, 2))
        for i in range(40):
            p = int(rng.integers(0, 4))
            q = int(nn[p, int(rng.integers(0, 1))])
            u = float(rng.random())
            expected[i] = corners[p] + u * (corners[q] - corners[p])
        assert np.allclose(out, expected)

        # every synthetic point lies on an edge, never the diagonal
        on_edge = (np.isclose(out[:, 0], 0) | np.isclose(out[:, 0], 1)
                   | np.isclose(out[:, 1], 0) | np.isclose(out[:, 1], 1))
        assert on_edge.all()

    def test_zero_synthetic(self):
        out = smote_oversample(np.array([[1.0, 2.0]]), 0, 5, seed=0)
        assert out.shape == (0, 2)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            smote_oversample(np.array([[1.0]]), -1, 5, seed=0)


class TestApportion:
    def test_hand_computed_quota(self):
        # deficit 48 split over clusters with 8 and 4 members: 32 and 16
        assert apportion_largest_remainder(48, [8, 4]) == [32, 16]

    def test_largest_remainder_rounding(self):
        quotas = apportion_largest_remainder(10, [1, 1, 1])
        assert sum(quotas) == 10
        assert sorted(quotas) == [3, 3, 4]
        assert quotas[0] == 4  # remainder tie breaks to the lower index

    def test_zero_weight_gets_nothing(self):
        assert apportion_largest_remainder(7, [3, 0, 4]) == [3, 0, 4]

    def test_exactness_fuzz(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            total = int(rng.integers(0, 100))
            weights = rng.integers(0, 20, size=rng.integers(1, 8))
            if weights.sum() == 0:
                weights[0] = 1
            quotas = apportion_largest_remainder(total, weights)
            assert sum(quotas) == total
            assert all(q == 0 for q, w in zip(quotas, weights) if w == 0)


def imbalanced_dataset(counts=(90, 10), seed=0):
    rng = np.random.default_rng(seed)
    parts, labels = [], []
    for c, n in enumerate(counts):
        parts.append(rng.normal(3.0 * c, 0.5, (n, 3)))
        labels.append(np.full(n, c))
    names = [f"f{j}" for j in range(3)]
    lm = LabelMap.from_names([f"class_{c}" for c in range(len(counts))])
    return Dataset(np.vstack(parts), names, np.concatenate(labels), lm)


class TestBalanceDataset:
    def test_match_majority_counts(self):
        d = imbalanced_dataset((90, 10))
        balanced, report = balance_dataset(d, BalanceConfig(seed=1))
        counts = np.bincount(balanced.labels)
        assert counts.tolist() == [90, 90]
        assert report.class_counts_after == {"class_0": 90, "class_1": 90}

    def test_already_balanced_identity(self):
        d = imbalanced_dataset((50, 50))
        balanced, report = balance_dataset(d, BalanceConfig(seed=2))
        assert balanced.n_rows == 100
        assert (balanced.features == d.features).all()
        assert sum(report.synthetic_per_cluster) == 0

    def test_originals_preserved(self):
        d = imbalanced_dataset((60, 12))
        balanced, _ = balance_dataset(d, BalanceConfig(seed=3))
        assert (balanced.features[:72] == d.features).all()
        assert (balanced.labels[:72] == d.labels).all()

    def test_explicit_factor(self):
        d = imbalanced_dataset((60, 12))
        cfg = BalanceConfig(target_policy="explicit_factor", factor=2.5, seed=4)
        balanced, _ = balance_dataset(d, cfg)
        # ceil((2.5 - 1) * 12) = 18 synthetic rows for the minority
        assert np.bincount(balanced.labels).tolist() == [60, 30]

    def test_bounding_box_invariant(self):
        d = imbalanced_dataset((200, 30, 15), seed=7)
        cfg = BalanceConfig(k=3, seed=5)
        balanced, report = balance_dataset(d, cfg)
        # recompute the clustering the balancer used (same seed)
        cl = kmeans(d.features, 3, seed=5)
        n_orig = d.n_rows
        synth_X = balanced.features[n_orig:]
        synth_y = balanced.labels[n_orig:]
        for row, label in zip(synth_X, synth_y):
            ok = False
            for c in range(3):
                members = d.features[(cl.assignment == c) & (d.labels == label)]
                if members.shape[0] == 0:
                    continue
                lo, hi = members.min(axis=0), members.max(axis=0)
                if ((row >= lo - 1e-9) & (row <= hi + 1e-9)).all():
                    ok = True
                    break
            assert ok

    def test_determinism(self):
        d = imbalanced_dataset((80, 20, 9), seed=8)
        cfg = BalanceConfig(seed=6)
        a, _ = balance_dataset(d, cfg)
        b, _ = balance_dataset(d, cfg)
        assert (a.features == b.features).all()
        assert (a.labels == b.labels).all()

    def test_single_class_error(self):
        d = imbalanced_dataset((50,))
        with pytest.raises(DataError):
            balance_dataset(d, BalanceConfig(seed=0))

    def test_quota_apportionment_proportional(self):
        # two far-apart clusters holding 8 and 4 minority rows; majority 60
        rng = np.random.default_rng(9)
        maj = rng.normal(0, 20.0, (60, 2))
        min_a = rng.normal((0, 0), 0.1, (8, 2))
        min_b = rng.normal((100, 100), 0.1, (4, 2))
        X = np.vstack([maj, min_a, min_b])
        y = np.array([0] * 60 + [1] * 12)
        Xb, yb, report = balance_arrays(
            X, y, 2, BalanceConfig(k=2, seed=10), class_names=["maj", "min"]
        )
        assert np.bincount(yb).tolist() == [60, 60]
        synth = Xb[72:]
        near_a = (np.abs(synth - [0, 0]).max(axis=1) < 50).sum()
        near_b = (np.abs(synth - [100, 100]).max(axis=1) < 50).sum()
        assert near_a + near_b == 48

    def test_report_json(self):
        d = imbalanced_dataset((30, 10))
        _, report = balance_dataset(d, BalanceConfig(seed=11))
        payload = json.loads(report.to_json())
        assert set(payload) == {
            "class_counts_before",
            "class_counts_after",
            "synthetic_per_cluster",
            "k",
            "seed",
        }


class TestKMeansSmoteEstimator:
    def test_fit_resample(self):
        d = imbalanced_dataset((70, 15))
        sampler = KMeansSmote(seed=3)
        X_res, y_res = sampler.fit_resample(d.features, d.labels)
        assert np.bincount(y_res).tolist() == [70, 70]
        assert sampler.report_.k == 2

    def test_get_params(self):
        params = KMeansSmote(k=4, seed=9).get_params()
        assert params["k"] == 4 and params["seed"] == 9

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BalanceConfig(target_policy="explicit_factor", factor=None)
        with pytest.raises(ValueError):
            BalanceConfig(target_policy="bogus")
        with pytest.raises(ValueError):
            BalanceConfig(smote_k_neighbors=0)
