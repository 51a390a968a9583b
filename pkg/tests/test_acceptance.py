"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Every tolerance is pinned here; nothing is deferred to calibration.
"""

import math
import time
from collections import Counter

import numpy as np
import pytest
from scipy import stats as scipy_stats

from nidskit.balance import BalanceConfig, balance_arrays, kmeans
from nidskit.dataset import one_hot
from nidskit.evaluate import ConfusionMatrix, metrics
from nidskit.fcbf import fcbf_select, symmetrical_uncertainty
from nidskit.hpo import SearchSpace, TpeConfig, optimize, uniform
from nidskit.models import ConvBlock, ConvNet, loss_and_gradients
from nidskit.pca import fit_pca, inverse_transform, transform
from nidskit.pipeline import PipelineConfig, run_hpo_comparison, run_pipeline
from nidskit.synth import BENCHMARK, SynthSpec, generate_synthetic, write_synthetic_csv


def report(number: int, description: str, started: float) -> None:
    print(f"ACCEPTANCE {number} PASS ({time.perf_counter() - started:.1f}s): {description}")


@pytest.fixture(scope="module")
def benchmark_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    return write_synthetic_csv(BENCHMARK, str(out))["csv_path"]


def test_criterion_1_metric_formulas():
    started = time.perf_counter()
    m = metrics(ConfusionMatrix(np.diag([4, 3, 2]), ["a", "b", "c"]))
    for pc in m.per_class:
        assert abs(pc.accuracy - 1.0) < 1e-12
        assert abs(pc.precision - 1.0) < 1e-12
        assert abs(pc.recall - 1.0) < 1e-12
        assert abs(pc.f1 - 1.0) < 1e-12

    m = metrics(ConfusionMatrix(np.array([[0, 1], [0, 1]]), ["neg", "pos"]))
    pos = m.per_class[1]
    assert abs(pos.precision - 1 / 2) < 1e-12
    assert abs(pos.recall - 1.0) < 1e-12
    assert abs(pos.f1 - 2 / 3) < 1e-12

    m = metrics(ConfusionMatrix(np.array([[5, 1, 0], [2, 3, 0], [0, 0, 4]]), ["a", "b", "c"]))
    c0 = m.per_class[0]
    assert abs(c0.precision - 5 / 7) < 1e-12
    assert abs(c0.recall - 5 / 6) < 1e-12
    assert abs(c0.accuracy - 12 / 15) < 1e-12
    report(1, "per-class metric formulas match hand-computed values (1e-12)", started)


def test_criterion_2_gradient_correctness():
    started = time.perf_counter()

    def relative_error(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-4)

    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        net = ConvNet([ConvBlock(2, 3, 2)], dense_units=4, dropout_rate=0.25,
                      input_len=8, n_classes=3, seed=seed)
        X = rng.standard_normal((5, 8))
        Y = one_hot(rng.integers(0, 3, 5), 3)
        mask = net.draw_dropout_mask(5, np.random.default_rng(seed + 1000))
        _, grads = loss_and_gradients(net, X, Y, mask)
        h = 1e-5
        for key, w in net.weights.items():
            flat = w.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                lp, _ = loss_and_gradients(net, X, Y, mask)
                flat[i] = orig - h
                lm, _ = loss_and_gradients(net, X, Y, mask)
                flat[i] = orig
                worst = max(worst, relative_error(grads[key].ravel()[i], (lp - lm) / (2 * h)))
    assert worst < 1e-4
    report(2, f"analytic vs central-difference gradients, max rel err {worst:.2e} < 1e-4, 10 seeds", started)


def test_criterion_3_pca():
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 6)) @ rng.standard_normal((6, 6))
    model = fit_pca(X, n_components=6)
    assert np.abs(model.components @ model.components.T - np.eye(6)).max() < 1e-8
    cov = np.cov(X, rowvar=False)
    assert abs(model.eigenvalues.sum() - np.trace(cov)) < 1e-9

    errors = []
    for k in range(1, 7):
        mk = fit_pca(X, n_components=k)
        recon = inverse_transform(transform(X, mk), mk)
        errors.append(((X - recon) ** 2).sum())
    for a, b in zip(errors, errors[1:]):
        assert b <= a + 1e-9

    a, b = 1.5, math.sqrt(0.75)
    points = np.array([[a, a], [-a, -a], [b, -b], [-b, b]])
    m2 = fit_pca(points, n_components=2)
    assert np.abs(m2.eigenvalues - np.array([3.0, 1.0])).max() < 1e-9
    report(3, "PCA orthonormality 1e-8, trace match 1e-9, monotone reconstruction, 2x2 case", started)


def test_criterion_4_fcbf_oracle_equivalence():
    started = time.perf_counter()

    def oracle_entropy(values):
        n = len(values)
        return -sum((c / n) * math.log2(c / n) for c in Counter(values).values())

    def oracle_su(x, y):
        hx, hy = oracle_entropy(x), oracle_entropy(y)
        if hx + hy == 0:
            return 0.0
        return 2.0 * (hx + hy - oracle_entropy(list(zip(x, y)))) / (hx + hy)

    def oracle_fcbf(X, y, threshold):
        n_cols = X.shape[1]
        rel = [oracle_su(list(X[:, j]), list(y)) for j in range(n_cols)]
        order = sorted(range(n_cols), key=lambda j: (-rel[j], j))
        selected, remaining = [], list(order)
        while remaining:
            f = remaining.pop(0)
            if rel[f] > threshold:
                selected.append(f)
                remaining = [
                    g for g in remaining
                    if oracle_su(list(X[:, f]), list(X[:, g])) < rel[g]
                ]
        return selected

    rng = np.random.default_rng(4)
    for _ in range(50):
        n_rows = int(rng.integers(12, 50))
        n_cols = int(rng.integers(1, 9))
        X = rng.integers(0, int(rng.integers(2, 5)), size=(n_rows, n_cols)).astype(float)
        y = rng.integers(0, 3, n_rows)
        threshold = float(rng.uniform(0.0, 0.25))
        assert fcbf_select(X, y, threshold).selected_indices == oracle_fcbf(X, y, threshold)

    for _ in range(10_000):
        n = int(rng.integers(1, 25))
        x = rng.integers(0, 5, n)
        y = rng.integers(0, 5, n)
        su = symmetrical_uncertainty(x, y)
        assert 0.0 <= su <= 1.0
        assert abs(su - symmetrical_uncertainty(y, x)) < 1e-12
    report(4, "FCBF matches step-by-step oracle on 50 datasets; SU fuzz 10^4 cases", started)


def test_criterion_5_balancing():
    started = time.perf_counter()
    dataset, _ = generate_synthetic(BENCHMARK)
    assert np.bincount(dataset.labels).tolist() == [500, 200, 100, 50, 20]

    cfg = BalanceConfig(seed=77)
    Xb, yb, _ = balance_arrays(
        dataset.features, dataset.labels, 5, cfg,
        class_names=list(dataset.label_map.class_names),
    )
    assert np.bincount(yb).tolist() == [500, 500, 500, 500, 500]

    clustering = kmeans(dataset.features, 5, seed=cfg.seed)
    for a, b in zip(clustering.inertia_history, clustering.inertia_history[1:]):
        assert b <= a + 1e-9

    n_orig = dataset.n_rows
    for row, label in zip(Xb[n_orig:], yb[n_orig:]):
        inside = False
        for c in range(5):
            members = dataset.features[
                (clustering.assignment == c) & (dataset.labels == label)
            ]
            if members.shape[0] == 0:
                continue
            lo, hi = members.min(axis=0), members.max(axis=0)
            if ((row >= lo - 1e-9) & (row <= hi + 1e-9)).all():
                inside = True
                break
        assert inside
    report(5, "match_majority reaches 500 per class; bbox check; inertia monotone", started)


def test_criterion_6_tpe_benchmark():
    started = time.perf_counter()
    space = SearchSpace((uniform("x", 0.0, 10.0),))
    hits = 0
    for seed in range(50):
        cfg = TpeConfig(gamma=0.25, n_startup=15, n_candidates=24, seed=seed)
        best, _, _ = optimize(lambda c: -((c["x"] - 3.0) ** 2), space, 60, cfg)
        hits += abs(best["x"] - 3.0) <= 0.5
    assert hits >= 45

    sphere = SearchSpace((uniform("x", -5.0, 5.0), uniform("y", -5.0, 5.0)))
    objective = lambda c: -(c["x"] ** 2 + c["y"] ** 2)
    wins = losses = 0
    for seed in range(30):
        tpe_best = optimize(objective, sphere, 60, TpeConfig(seed=seed))[1]
        rs_best = optimize(objective, sphere, 60, TpeConfig(seed=seed, n_startup=60))[1]
        if tpe_best > rs_best:
            wins += 1
        elif tpe_best < rs_best:
            losses += 1
    p_value = scipy_stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    assert p_value < 0.05
    report(6, f"quadratic {hits}/50 within 0.5; sphere sign test wins={wins} p={p_value:.2e}", started)


def test_criterion_7_end_to_end(benchmark_csv, tmp_path):
    started = time.perf_counter()
    rf_cfg = PipelineConfig.from_dict({
        "input": benchmark_csv,
        "seed": 42,
        "out": str(tmp_path / "rf"),
        "model": {"kind": "random_forest", "params": {"n_trees": 20}},
        "verbose": False,
    })
    rf_summary = run_pipeline(rf_cfg)
    assert rf_summary["final_metrics"]["macro_f1"] >= 0.90

    rerun = run_pipeline(rf_cfg)
    assert all(stage["cache_hit"] for stage in rerun["stages"])
    with open(rf_summary["report_json"], "rb") as fh:
        first = fh.read()
    with open(rerun["report_json"], "rb") as fh:
        second = fh.read()
    assert first == second

    cnn_cfg = PipelineConfig.from_dict({
        "input": benchmark_csv,
        "seed": 42,
        "out": str(tmp_path / "cnn"),
        "model": {"kind": "cnn", "params": {"epochs": 30, "learning_rate": 0.01}},
        "verbose": False,
    })
    cnn_summary = run_pipeline(cnn_cfg)
    assert cnn_summary["final_metrics"]["macro_f1"] >= 0.85
    report(
        7,
        f"end-to-end macro-F1: RF {rf_summary['final_metrics']['macro_f1']:.3f} >= 0.90, "
        f"CNN {cnn_summary['final_metrics']['macro_f1']:.3f} >= 0.85; byte-identical rerun",
        started,
    )


def test_criterion_8_hpo_comparison(tmp_path):
    started = time.perf_counter()
    # harder variant of the benchmark so tuning has headroom over the default
    spec = SynthSpec(
        n_classes=5, rows_per_class=(500, 200, 100, 50, 20), n_features=12,
        n_informative=6, n_redundant=3, separation=1.1, seed=2017,
    )
    csv_path = write_synthetic_csv(spec, str(tmp_path / "hard"))["csv_path"]
    defaults, tuned = [], []
    for seed in range(10):
        cfg = PipelineConfig.from_dict({
            "input": csv_path,
            "seed": seed,
            "out": str(tmp_path / f"cmp{seed}"),
            "model": {"kind": "random_forest", "params": {"n_trees": 8, "max_depth": 4}},
            "hpo": {
                "budget": 20,
                "space": [
                    {"name": "n_trees", "type": "integer_range", "lo": 5, "hi": 30},
                    {"name": "max_depth", "type": "integer_range", "lo": 2, "hi": 16},
                    {"name": "features_per_split", "type": "categorical",
                     "choices": ["sqrt", "log2", "all"]},
                ],
            },
            "verbose": False,
        })
        comparison = run_hpo_comparison(cfg)["comparison"]
        defaults.append(comparison["without_hpo"]["accuracy"])
        tuned.append(comparison["with_hpo"]["accuracy"])
    median_default = float(np.median(defaults))
    median_tuned = float(np.median(tuned))
    assert median_tuned >= median_default
    report(
        8,
        f"median tuned accuracy {median_tuned:.4f} >= median default {median_default:.4f} "
        "(RF, budget 20, 10 seeds)",
        started,
    )


def test_criterion_9_leakage_guard(benchmark_csv, tmp_path):
    started = time.perf_counter()
    for seed in range(5):
        cfg = PipelineConfig.from_dict({
            "input": benchmark_csv,
            "seed": seed,
            "out": str(tmp_path / f"run{seed}"),
            "balance_order": "after_split",
            "model": {"kind": "random_forest", "params": {"n_trees": 5}},
            "verbose": False,
        })
        assert run_pipeline(cfg)["synthetic_rows_in_test"] == 0
    report(9, "after_split keeps every synthetic row out of the test partition (5 seeds)", started)
