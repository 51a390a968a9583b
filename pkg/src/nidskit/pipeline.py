"""Configuration-driven orchestration of the full detection pipeline.

Stage chain: ingest -> clean -> feature scaling -> FCBF -> PCA -> balancing
-> split -> (optional tuning) -> train -> evaluate -> report. The
``balance_order`` knob decides where the class balancing (and therefore the
statistics fitting) happens:

* ``after_split`` (default, leakage-safe): rows are partitioned first;
  scaler/selector/projection are fitted on the training rows only and
  reapplied to validation/test; only the training partition is balanced, so
  no synthetic row can reach the test set.
* ``before_split`` (the narrative order of the source methodology): the
  stages are fitted on all rows, the whole dataset is balanced, and the
  partition happens last.

Every stage result is cached under ``<out>/<stage>/<hash>.json`` keyed by a
content hash of its inputs and parameters, so reruns (and repeated trainings
during tuning) reuse work and reproduce byte-identical reports. Each
stochastic stage consumes a child seed derived from the master seed and the
stage name.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .balance import BalanceConfig, balance_arrays
from .dataset import Dataset, SplitSpec, clean, load_csv, split_indices
from .errors import ConfigError, DataError, StageError
from .evaluate import ConfusionMatrix, confusion, metrics, render_report
from .fcbf import FcbfSelector
from .hpo import SearchSpace, TpeConfig, optimize
from .models import ConvNetClassifier, RandomForestModel
from .normalize import MinMaxNormalizer
from .pca import PrincipalComponents
from .seeding import derive_seed

__all__ = [
    "PipelineConfig",
    "StageArtifact",
    "StageCache",
    "run_pipeline",
    "run_hpo_comparison",
]


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _digest(obj) -> str:
    return hashlib.sha256(_canonical_json(obj).encode()).hexdigest()[:16]


def _log(event: dict, verbose: bool = True) -> None:
    if verbose:
        print(_canonical_json(event), file=sys.stderr)


@dataclass(frozen=True)
class StageArtifact:
    stage: str
    key: str
    path: str


class StageCache:
    """Content-addressed JSON payload store under the run's output dir."""

    def __init__(self, root: str, verbose: bool = True):
        self.root = root
        self.verbose = verbose

    def run(self, stage: str, params: dict, input_keys: list[str], compute):
        key = _digest({"stage": stage, "params": params, "inputs": input_keys})
        stage_dir = os.path.join(self.root, stage)
        path = os.path.join(stage_dir, f"{key}.json")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
            _log({"stage": stage, "event": "cache_hit", "key": key}, self.verbose)
            return payload, StageArtifact(stage, key, path), True
        _log({"stage": stage, "event": "start", "key": key}, self.verbose)
        started = time.perf_counter()
        try:
            payload = compute()
        except Exception as exc:
            _log({"stage": stage, "event": "error", "error": str(exc)}, self.verbose)
            raise StageError(stage, exc) from exc
        os.makedirs(stage_dir, exist_ok=True)
        tmp = path + f".tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, path)
        _log(
            {
                "stage": stage,
                "event": "done",
                "key": key,
                "seconds": round(time.perf_counter() - started, 3),
            },
            self.verbose,
        )
        return payload, StageArtifact(stage, key, path), False


# --------------------------------------------------------------------------
# configuration


@dataclass
class FcbfStageConfig:
    enabled: bool = True
    threshold: float = 0.01
    n_bins: int = 10


@dataclass
class PcaStageConfig:
    enabled: bool = True
    n_components: int | None = None
    variance_fraction: float | None = None


@dataclass
class BalanceStageConfig:
    enabled: bool = True
    k: int | None = None
    smote_k_neighbors: int = 5
    target_policy: str = "match_majority"
    factor: float | None = None


@dataclass
class ModelConfig:
    kind: str = "random_forest"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("random_forest", "cnn"):
            raise ConfigError(f"unknown model kind: {self.kind}")


@dataclass
class HpoConfig:
    space: list = field(default_factory=list)
    budget: int = 30
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("hpo budget must be >= 1")
        if not self.space:
            raise ConfigError("hpo space must be non-empty")


@dataclass
class PipelineConfig:
    input: str
    label_column: str = "Label"
    seed: int = 0
    out_dir: str = "runs"
    clean_enabled: bool = True
    normalize_enabled: bool = True
    fcbf: FcbfStageConfig = field(default_factory=FcbfStageConfig)
    pca: PcaStageConfig = field(default_factory=PcaStageConfig)
    balance: BalanceStageConfig = field(default_factory=BalanceStageConfig)
    balance_order: str = "after_split"
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    stratified: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    hpo: HpoConfig | None = None
    verbose: bool = True

    def __post_init__(self):
        if self.balance_order not in ("after_split", "before_split"):
            raise ConfigError(f"unknown balance_order: {self.balance_order}")

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        try:
            stages = d.get("stages", {})
            fcbf_d = stages.get("fcbf", {})
            pca_d = stages.get("pca", {})
            bal_d = stages.get("balance", {})
            split_d = d.get("split", {})
            model_d = d.get("model", {})
            hpo_d = d.get("hpo")
            hpo = None
            if hpo_d is not None:
                tpe = hpo_d.get("tpe", {})
                hpo = HpoConfig(
                    space=hpo_d.get("space", []),
                    budget=hpo_d.get("budget", 30),
                    gamma=tpe.get("gamma", 0.25),
                    n_startup=tpe.get("n_startup", 10),
                    n_candidates=tpe.get("n_candidates", 24),
                )
            return cls(
                input=d["input"],
                label_column=d.get("label_column", "Label"),
                seed=int(d.get("seed", 0)),
                out_dir=d.get("out", "runs"),
                clean_enabled=stages.get("clean", {}).get("enabled", True),
                normalize_enabled=stages.get("normalize", {}).get("enabled", True),
                fcbf=FcbfStageConfig(
                    enabled=fcbf_d.get("enabled", True),
                    threshold=fcbf_d.get("threshold", 0.01),
                    n_bins=fcbf_d.get("n_bins", 10),
                ),
                pca=PcaStageConfig(
                    enabled=pca_d.get("enabled", True),
                    n_components=pca_d.get("n_components"),
                    variance_fraction=pca_d.get("variance_fraction"),
                ),
                balance=BalanceStageConfig(
                    enabled=bal_d.get("enabled", True),
                    k=bal_d.get("k"),
                    smote_k_neighbors=bal_d.get("smote_k_neighbors", 5),
                    target_policy=bal_d.get("target_policy", "match_majority"),
                    factor=bal_d.get("factor"),
                ),
                balance_order=d.get("balance_order", "after_split"),
                test_fraction=split_d.get("test_fraction", 0.2),
                validation_fraction=split_d.get("validation_fraction", 0.2),
                stratified=split_d.get("stratified", True),
                model=ModelConfig(
                    kind=model_d.get("kind", "random_forest"),
                    params=dict(model_d.get("params", {})),
                ),
                hpo=hpo,
                verbose=bool(d.get("verbose", True)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str) -> "PipelineConfig":
        if not os.path.isfile(path):
            raise ConfigError(f"no such config file: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            test_fraction=self.test_fraction,
            validation_fraction=self.validation_fraction,
            stratified=self.stratified,
            seed=derive_seed(self.seed, "split"),
        )


# --------------------------------------------------------------------------
# model construction


def _cnn_params_from_flat(params: dict) -> dict:
    """Translate flat tuning keys (n_filters/kernel_size/pool_size) into a
    single conv block; pass everything else through."""
    out = dict(params)
    flat_keys = {"n_filters", "kernel_size", "pool_size"}
    if flat_keys & out.keys():
        block = [int(out.pop("n_filters", 8)), int(out.pop("kernel_size", 3)), int(out.pop("pool_size", 2))]
        out["conv_blocks"] = (tuple(block),)
    elif "conv_blocks" in out:
        out["conv_blocks"] = tuple(tuple(b) for b in out["conv_blocks"])
    return out


def build_model(kind: str, params: dict, seed: int):
    params = dict(params)
    params.pop("seed", None)  # the pipeline's derived seed wins
    if kind == "random_forest":
        return RandomForestModel(**params, seed=seed)
    if kind == "cnn":
        return ConvNetClassifier(**_cnn_params_from_flat(params), seed=seed)
    raise ConfigError(f"unknown model kind: {kind}")


# --------------------------------------------------------------------------
# pipeline runs


@dataclass
class _Prepared:
    """Partitions ready for training plus bookkeeping for the summary."""

    train: Dataset
    validation: Dataset
    test: Dataset
    stages: list[dict]
    artifacts: dict[str, StageArtifact]
    balance_report: dict | None
    synthetic_rows_in_test: int
    last_key: str


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _stage_record(name: str, hit: bool, dataset: Dataset | None = None, **extra) -> dict:
    rec = {"stage": name, "cache_hit": hit}
    if dataset is not None:
        rec["rows"] = dataset.n_rows
        rec["cols"] = dataset.n_cols
    rec.update(extra)
    return rec


def _prepare(cfg: PipelineConfig, cache: StageCache) -> _Prepared:
    if not os.path.isfile(cfg.input):
        raise DataError(f"no such input file: {cfg.input}")
    stages: list[dict] = []
    artifacts: dict[str, StageArtifact] = {}

    payload, art, hit = cache.run(
        "ingest",
        {"label_column": cfg.label_column},
        [_file_digest(cfg.input)],
        lambda: load_csv(cfg.input, cfg.label_column).to_dict(),
    )
    d = Dataset.from_dict(payload)
    artifacts["ingest"] = art
    stages.append(_stage_record("ingest", hit, d))
    key = art.key

    if cfg.clean_enabled:
        def _clean():
            cleaned, report = clean(d)
            return {"dataset": cleaned.to_dict(), "report": report.to_dict()}

        payload, art, hit = cache.run("clean", {}, [key], _clean)
        d = Dataset.from_dict(payload["dataset"])
        artifacts["clean"] = art
        stages.append(_stage_record("clean", hit, d, report=payload["report"]))
        key = art.key

    after_split = cfg.balance_order == "after_split"
    split_seed = derive_seed(cfg.seed, "split")

    if after_split:
        idx_payload, art, hit = cache.run(
            "split",
            {
                "test_fraction": cfg.test_fraction,
                "validation_fraction": cfg.validation_fraction,
                "stratified": cfg.stratified,
                "seed": split_seed,
            },
            [key],
            lambda: _split_payload(d, cfg),
        )
        artifacts["split"] = art
        stages.append(_stage_record("split", hit, partition_sizes=_sizes(idx_payload)))
        fit_rows = np.asarray(idx_payload["train"], dtype=np.int64)
    else:
        idx_payload = None
        fit_rows = np.arange(d.n_rows)

    d, key = _preprocess(cfg, cache, d, key, fit_rows, stages, artifacts)

    balance_report = None
    synthetic_in_test = 0
    if after_split:
        train = d.subset_rows(np.asarray(idx_payload["train"], dtype=np.int64))
        validation = d.subset_rows(np.asarray(idx_payload["validation"], dtype=np.int64))
        test = d.subset_rows(np.asarray(idx_payload["test"], dtype=np.int64))
        if cfg.balance.enabled:
            train, balance_report, key = _balance_stage(cfg, cache, train, key, stages, artifacts)
    else:
        n_original = d.n_rows
        if cfg.balance.enabled:
            d, balance_report, key = _balance_stage(cfg, cache, d, key, stages, artifacts)
        idx_payload, art, hit = cache.run(
            "split",
            {
                "test_fraction": cfg.test_fraction,
                "validation_fraction": cfg.validation_fraction,
                "stratified": cfg.stratified,
                "seed": split_seed,
            },
            [key],
            lambda: _split_payload(d, cfg),
        )
        artifacts["split"] = art
        stages.append(_stage_record("split", hit, partition_sizes=_sizes(idx_payload)))
        test_idx = np.asarray(idx_payload["test"], dtype=np.int64)
        synthetic_in_test = int((test_idx >= n_original).sum())
        train = d.subset_rows(np.asarray(idx_payload["train"], dtype=np.int64))
        validation = d.subset_rows(np.asarray(idx_payload["validation"], dtype=np.int64))
        test = d.subset_rows(test_idx)

    return _Prepared(
        train, validation, test, stages, artifacts, balance_report, synthetic_in_test, key
    )


def _sizes(idx_payload: dict) -> dict:
    return {name: len(idx_payload[name]) for name in ("train", "validation", "test")}


def _split_payload(d: Dataset, cfg: PipelineConfig) -> dict:
    train_idx, val_idx, test_idx = split_indices(d.labels, d.label_map, cfg.split_spec())
    return {
        "train": train_idx.tolist(),
        "validation": val_idx.tolist(),
        "test": test_idx.tolist(),
    }


def _preprocess(cfg, cache, d, key, fit_rows, stages, artifacts):
    """Normalize / FCBF / PCA, each fitted on fit_rows and applied to all."""
    if cfg.normalize_enabled:
        def _normalize_payload():
            scaler = MinMaxNormalizer()
            scaler.fit(d.features[fit_rows])
            stats = scaler.stats_
            stats.column_names = list(d.feature_names)
            return {
                "dataset": d.with_features(
                    scaler.transform(d.features), d.feature_names
                ).to_dict(),
                "stats": json.loads(stats.to_json()),
            }

        payload, art, hit = cache.run(
            "normalize", {"fit_rows": _digest(fit_rows.tolist())}, [key], _normalize_payload
        )
        d = Dataset.from_dict(payload["dataset"])
        artifacts["normalize"] = art
        stages.append(_stage_record("normalize", hit, d))
        key = art.key

    if cfg.fcbf.enabled:
        def _fcbf_payload():
            selector = FcbfSelector(cfg.fcbf.threshold, cfg.fcbf.n_bins)
            selector.fit(
                d.features[fit_rows], d.labels[fit_rows], feature_names=d.feature_names
            )
            subset = selector.subset_
            reduced = d.with_features(selector.transform(d.features), subset.selected_names)
            return {"dataset": reduced.to_dict(), "selection": json.loads(subset.to_json())}

        payload, art, hit = cache.run(
            "fcbf",
            {
                "threshold": cfg.fcbf.threshold,
                "n_bins": cfg.fcbf.n_bins,
                "fit_rows": _digest(fit_rows.tolist()),
            },
            [key],
            _fcbf_payload,
        )
        d = Dataset.from_dict(payload["dataset"])
        artifacts["fcbf"] = art
        stages.append(
            _stage_record("fcbf", hit, d, selected=payload["selection"]["selected"])
        )
        key = art.key
        if d.n_cols == 0:
            raise DataError("FCBF selected no features; lower the threshold")

    if cfg.pca.enabled:
        def _pca_payload():
            projector = PrincipalComponents(cfg.pca.n_components, cfg.pca.variance_fraction)
            projector.fit(d.features[fit_rows])
            names = [f"pc_{i}" for i in range(projector.components_.shape[0])]
            reduced = d.with_features(projector.transform(d.features), names)
            return {
                "dataset": reduced.to_dict(),
                "model": json.loads(projector.model_.to_json()),
                "explained_variance_ratio": projector.explained_variance_ratio_.tolist(),
            }

        payload, art, hit = cache.run(
            "pca",
            {
                "n_components": cfg.pca.n_components,
                "variance_fraction": cfg.pca.variance_fraction,
                "fit_rows": _digest(fit_rows.tolist()),
            },
            [key],
            _pca_payload,
        )
        d = Dataset.from_dict(payload["dataset"])
        artifacts["pca"] = art
        stages.append(_stage_record("pca", hit, d))
        key = art.key

    return d, key


def _balance_stage(cfg, cache, d, key, stages, artifacts):
    balance_seed = derive_seed(cfg.seed, "balance")

    def _payload():
        bal_cfg = BalanceConfig(
            k=cfg.balance.k,
            smote_k_neighbors=cfg.balance.smote_k_neighbors,
            target_policy=cfg.balance.target_policy,
            factor=cfg.balance.factor,
            seed=balance_seed,
        )
        X, y, report = balance_arrays(
            d.features, d.labels, len(d.label_map), bal_cfg,
            class_names=list(d.label_map.class_names),
        )
        balanced = Dataset(X, list(d.feature_names), y, d.label_map)
        return {"dataset": balanced.to_dict(), "report": json.loads(report.to_json())}

    params = {
        "k": cfg.balance.k,
        "smote_k_neighbors": cfg.balance.smote_k_neighbors,
        "target_policy": cfg.balance.target_policy,
        "factor": cfg.balance.factor,
        "seed": balance_seed,
    }
    payload, art, hit = cache.run("balance", params, [key], _payload)
    d = Dataset.from_dict(payload["dataset"])
    artifacts["balance"] = art
    stages.append(_stage_record("balance", hit, d, report=payload["report"]))
    return d, payload["report"], art.key


def _train_stage(cfg, cache, prepared: _Prepared, stage_name: str, params: dict):
    """Train (cached) and return (model_payload, metrics payload inputs)."""
    train_seed = derive_seed(cfg.seed, "train")

    def _payload():
        model = build_model(cfg.model.kind, params, train_seed)
        started = time.perf_counter()
        if cfg.model.kind == "cnn":
            validation = None
            if prepared.validation.n_rows:
                validation = (prepared.validation.features, prepared.validation.labels)
            model.fit(
                prepared.train.features,
                prepared.train.labels,
                n_classes=len(prepared.train.label_map),
                validation=validation,
            )
            history = model.history_
        else:
            model.fit(prepared.train.features, prepared.train.labels)
            history = None
        train_seconds = time.perf_counter() - started
        return {
            "kind": cfg.model.kind,
            "hyperparameters": model.get_params(),
            "state": model.weights_to_dict(),
            "train_seconds": train_seconds,
            "history": history,
            "label_map": prepared.train.label_map.to_dict(),
        }

    cache_params = {"kind": cfg.model.kind, "params": params, "seed": train_seed}
    return cache.run(stage_name, cache_params, [prepared.last_key], _payload)


def _restore_model(payload: dict):
    kind = payload["kind"]
    params = dict(payload["hyperparameters"])
    if kind == "cnn" and "conv_blocks" in params:
        params["conv_blocks"] = tuple(tuple(b) for b in params["conv_blocks"])
    model = build_model(kind, params, params.get("seed", 0))
    model.weights_from_dict(payload["state"])
    return model


def _evaluate_stage(cfg, cache, prepared: _Prepared, model_payload, model_art, stage_name="evaluate"):
    def _payload():
        model = _restore_model(model_payload)
        predictions = model.predict(prepared.test.features)
        cm = confusion(
            prepared.test.labels,
            predictions,
            len(prepared.test.label_map),
            class_names=list(prepared.test.label_map.class_names),
        )
        m = metrics(cm)
        accuracy = float(np.trace(cm.counts) / cm.total) if cm.total else 0.0
        return {
            "confusion": cm.counts.tolist(),
            "class_names": list(prepared.test.label_map.class_names),
            "accuracy": accuracy,
            "macro_f1": m.macro_f1,
            "macro_precision": m.macro_precision,
            "macro_recall": m.macro_recall,
            "macro_accuracy": m.macro_accuracy,
        }

    return cache.run(stage_name, {}, [model_art.key], _payload)


def _metrics_from_eval(eval_payload: dict):
    cm = ConfusionMatrix(
        np.asarray(eval_payload["confusion"], dtype=np.int64), eval_payload["class_names"]
    )
    return metrics(cm)


def _write_report(out_dir: str, report: dict, text: str) -> tuple[str, str]:
    report_dir = os.path.join(out_dir, "report")
    os.makedirs(report_dir, exist_ok=True)
    json_path = os.path.join(report_dir, "report.json")
    text_path = os.path.join(report_dir, "report.txt")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return json_path, text_path


def _tune_stage(cfg, cache, prepared: _Prepared):
    if prepared.validation.n_rows == 0:
        raise ConfigError("hyperparameter tuning requires validation_fraction > 0")
    tune_seed = derive_seed(cfg.seed, "tune")
    train_seed = derive_seed(cfg.seed, "train")
    space = SearchSpace.from_dicts(cfg.hpo.space)
    tpe_cfg = TpeConfig(
        gamma=cfg.hpo.gamma,
        n_startup=cfg.hpo.n_startup,
        n_candidates=cfg.hpo.n_candidates,
        seed=tune_seed,
    )

    def _objective(config: dict) -> float:
        params = dict(cfg.model.params)
        params.update(config)
        model = build_model(cfg.model.kind, params, train_seed)
        if cfg.model.kind == "cnn":
            model.fit(
                prepared.train.features,
                prepared.train.labels,
                n_classes=len(prepared.train.label_map),
            )
        else:
            model.fit(prepared.train.features, prepared.train.labels)
        preds = model.predict(prepared.validation.features)
        return float((preds == prepared.validation.labels).mean())

    def _payload():
        best_config, best_score, history = optimize(
            _objective, space, cfg.hpo.budget, tpe_cfg
        )
        return {
            "best_config": best_config,
            "best_score": best_score,
            "trials": [
                {
                    "index": t.trial_index,
                    "config": t.config,
                    "score": t.score,
                    "seconds": t.seconds,
                }
                for t in history.trials
            ],
        }

    params = {
        "budget": cfg.hpo.budget,
        "space": cfg.hpo.space,
        "gamma": cfg.hpo.gamma,
        "n_startup": cfg.hpo.n_startup,
        "n_candidates": cfg.hpo.n_candidates,
        "seed": tune_seed,
        "model": {"kind": cfg.model.kind, "params": cfg.model.params},
    }
    payload, art, hit = cache.run("tune", params, [prepared.last_key], _payload)
    trials_path = os.path.join(cfg.out_dir, "tune", "trials.jsonl")
    os.makedirs(os.path.dirname(trials_path), exist_ok=True)
    with open(trials_path, "w", encoding="utf-8") as fh:
        for t in payload["trials"]:
            fh.write(_canonical_json(t) + "\n")
    return payload, art, hit


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute the configured stage chain; returns the run summary."""
    cache = StageCache(cfg.out_dir, cfg.verbose)
    prepared = _prepare(cfg, cache)
    stages = prepared.stages

    model_params = dict(cfg.model.params)
    if cfg.hpo is not None:
        tune_payload, art, hit = _tune_stage(cfg, cache, prepared)
        stages.append(
            _stage_record(
                "tune", hit, best_config=tune_payload["best_config"],
                best_score=tune_payload["best_score"],
            )
        )
        model_params.update(tune_payload["best_config"])

    model_payload, model_art, hit = _train_stage(cfg, cache, prepared, "train", model_params)
    stages.append(
        _stage_record("train", hit, train_seconds=model_payload["train_seconds"])
    )

    eval_payload, eval_art, hit = _evaluate_stage(cfg, cache, prepared, model_payload, model_art)
    stages.append(_stage_record("evaluate", hit))

    model_metrics = _metrics_from_eval(eval_payload)
    report, text = render_report(
        [
            {
                "name": cfg.model.kind,
                "metrics": model_metrics,
                "train_seconds": model_payload["train_seconds"],
            }
        ]
    )
    report["balance_order"] = cfg.balance_order
    report["synthetic_rows_in_test"] = prepared.synthetic_rows_in_test
    json_path, text_path = _write_report(cfg.out_dir, report, text)

    return {
        "stages": stages,
        "balance_order": cfg.balance_order,
        "balance_report": prepared.balance_report,
        "synthetic_rows_in_test": prepared.synthetic_rows_in_test,
        "final_metrics": {
            "accuracy": eval_payload["accuracy"],
            "macro_f1": eval_payload["macro_f1"],
            "macro_precision": eval_payload["macro_precision"],
            "macro_recall": eval_payload["macro_recall"],
        },
        "report_json": json_path,
        "report_text": text_path,
    }


def run_hpo_comparison(cfg: PipelineConfig) -> dict:
    """Train untuned and tuned variants of the configured model and emit the
    side-by-side comparison (training time, accuracy, macro-F1) on the same
    test partition."""
    if cfg.hpo is None:
        raise ConfigError("run_hpo_comparison requires an hpo section in the config")
    cache = StageCache(cfg.out_dir, cfg.verbose)
    prepared = _prepare(cfg, cache)

    default_payload, default_art, _ = _train_stage(
        cfg, cache, prepared, "train_default", dict(cfg.model.params)
    )
    default_eval, _, _ = _evaluate_stage(
        cfg, cache, prepared, default_payload, default_art, "evaluate_default"
    )

    tune_payload, _, _ = _tune_stage(cfg, cache, prepared)
    tuned_params = dict(cfg.model.params)
    tuned_params.update(tune_payload["best_config"])
    tuned_payload, tuned_art, _ = _train_stage(
        cfg, cache, prepared, "train_tuned", tuned_params
    )
    tuned_eval, _, _ = _evaluate_stage(
        cfg, cache, prepared, tuned_payload, tuned_art, "evaluate_tuned"
    )

    comparison = {
        "classifier": cfg.model.kind,
        "budget": cfg.hpo.budget,
        "best_config": tune_payload["best_config"],
        "without_hpo": {
            "train_seconds": default_payload["train_seconds"],
            "accuracy": default_eval["accuracy"],
            "f1": default_eval["macro_f1"],
        },
        "with_hpo": {
            "train_seconds": tuned_payload["train_seconds"],
            "accuracy": tuned_eval["accuracy"],
            "f1": tuned_eval["macro_f1"],
        },
    }
    report, text = render_report(
        [
            {
                "name": f"{cfg.model.kind} (default)",
                "metrics": _metrics_from_eval(default_eval),
                "train_seconds": default_payload["train_seconds"],
            },
            {
                "name": f"{cfg.model.kind} (tuned)",
                "metrics": _metrics_from_eval(tuned_eval),
                "train_seconds": tuned_payload["train_seconds"],
            },
        ],
        comparison=comparison,
    )
    json_path, text_path = _write_report(cfg.out_dir, report, text)
    return {
        "comparison": comparison,
        "stages": prepared.stages,
        "report_json": json_path,
        "report_text": text_path,
    }
