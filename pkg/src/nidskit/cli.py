"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, preprocess, select, reduce,
balance, split, train, tune, evaluate) plus the orchestrated `pipeline` run
and the `synth` data generator. Artifacts land under ``<out>/<stage>/``;
logs are JSON lines on stderr. Exit codes: 0 success, 1 usage error,
2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .balance import BalanceConfig, balance_dataset
from .dataset import Dataset, SplitSpec, clean, load_csv, split
from .errors import ConfigError, DataError, NidskitError
from .evaluate import confusion, metrics, render_report
from .fcbf import FcbfSelector
from .hpo import SearchSpace, TpeConfig, optimize
from .models import load_model, save_model
from .normalize import MinMaxNormalizer
from .pca import PrincipalComponents
from .pipeline import PipelineConfig, build_model, run_hpo_comparison, run_pipeline
from .seeding import derive_seed
from .synth import BENCHMARK, SynthSpec, write_synthetic_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_STAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log(event: dict) -> None:
    print(json.dumps(event, sort_keys=True), file=sys.stderr)


def _stage_dir(out: str, stage: str) -> str:
    path = os.path.join(out, stage)
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)


def _load_model_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"no such config file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc


# --------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        n_classes=args.classes,
        rows_per_class=tuple(int(x) for x in args.rows_per_class.split(",")),
        n_features=args.features,
        n_informative=args.informative,
        n_redundant=args.redundant,
        separation=args.separation,
        seed=args.seed,
    )
    metadata = write_synthetic_csv(spec, _stage_dir(args.out, "synth"))
    _log({"stage": "synth", "event": "done", "csv": metadata["csv_path"]})
    print(metadata["csv_path"])
    return EXIT_OK


def _cmd_ingest(args) -> int:
    d = load_csv(args.input, args.label_column)
    _log({"stage": "ingest", "event": "loaded", "rows": d.n_rows, "cols": d.n_cols})
    cleaned, report = clean(d)
    out = _stage_dir(args.out, "ingest")
    cleaned.save(os.path.join(out, "dataset.json"))
    _write_json(os.path.join(out, "clean_report.json"), report.to_dict())
    _log(
        {
            "stage": "ingest",
            "event": "done",
            "rows": cleaned.n_rows,
            "cols": cleaned.n_cols,
            "report": report.to_dict(),
        }
    )
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    d = Dataset.load(args.input)
    scaler = MinMaxNormalizer().fit(d.features)
    scaler.stats_.column_names = list(d.feature_names)
    out = _stage_dir(args.out, "preprocess")
    d.with_features(scaler.transform(d.features), d.feature_names).save(
        os.path.join(out, "dataset.json")
    )
    with open(os.path.join(out, "norm_stats.json"), "w", encoding="utf-8") as fh:
        fh.write(scaler.stats_.to_json())
    _log({"stage": "preprocess", "event": "done", "rows": d.n_rows, "cols": d.n_cols})
    return EXIT_OK


def _cmd_select(args) -> int:
    d = Dataset.load(args.input)
    selector = FcbfSelector(args.threshold, args.bins)
    selector.fit(d.features, d.labels, feature_names=d.feature_names)
    out = _stage_dir(args.out, "select")
    reduced = d.with_features(selector.transform(d.features), selector.subset_.selected_names)
    reduced.save(os.path.join(out, "dataset.json"))
    with open(os.path.join(out, "selection.json"), "w", encoding="utf-8") as fh:
        fh.write(selector.subset_.to_json())
    _log({"stage": "select", "event": "done", "kept": reduced.n_cols, "from": d.n_cols})
    return EXIT_OK


def _cmd_reduce(args) -> int:
    d = Dataset.load(args.input)
    projector = PrincipalComponents(args.components, args.variance)
    projector.fit(d.features)
    names = [f"pc_{i}" for i in range(projector.components_.shape[0])]
    out = _stage_dir(args.out, "reduce")
    d.with_features(projector.transform(d.features), names).save(
        os.path.join(out, "dataset.json")
    )
    with open(os.path.join(out, "pca_model.json"), "w", encoding="utf-8") as fh:
        fh.write(projector.model_.to_json())
    _log({"stage": "reduce", "event": "done", "components": len(names)})
    return EXIT_OK


def _cmd_balance(args) -> int:
    d = Dataset.load(args.input)
    cfg = BalanceConfig(
        k=args.k,
        smote_k_neighbors=args.smote_k,
        target_policy=args.policy,
        factor=args.factor,
        seed=args.seed,
    )
    balanced, report = balance_dataset(d, cfg)
    out = _stage_dir(args.out, "balance")
    balanced.save(os.path.join(out, "dataset.json"))
    with open(os.path.join(out, "balance_report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    _log({"stage": "balance", "event": "done", "rows": balanced.n_rows})
    return EXIT_OK


def _cmd_split(args) -> int:
    d = Dataset.load(args.input)
    spec = SplitSpec(
        test_fraction=args.test_fraction,
        validation_fraction=args.validation_fraction,
        stratified=not args.no_stratify,
        seed=args.seed,
    )
    train, validation, test = split(d, spec)
    out = _stage_dir(args.out, "split")
    train.save(os.path.join(out, "train.json"))
    validation.save(os.path.join(out, "validation.json"))
    test.save(os.path.join(out, "test.json"))
    _log(
        {
            "stage": "split",
            "event": "done",
            "train": train.n_rows,
            "validation": validation.n_rows,
            "test": test.n_rows,
        }
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    train_ds = Dataset.load(args.train)
    cfg = _load_model_config(args.config).get("model", {})
    kind = cfg.get("kind", "random_forest")
    params = dict(cfg.get("params", {}))
    model = build_model(kind, params, derive_seed(args.seed, "train"))
    out = _stage_dir(args.out, "train")
    if kind == "cnn":
        validation = None
        if args.validation:
            val_ds = Dataset.load(args.validation)
            validation = (val_ds.features, val_ds.labels)
        model.fit(
            train_ds.features,
            train_ds.labels,
            n_classes=len(train_ds.label_map),
            validation=validation,
        )
        _write_json(os.path.join(out, "history.json"), model.history_)
    else:
        model.fit(train_ds.features, train_ds.labels)
    save_model(model, train_ds.label_map, os.path.join(out, "model.json"))
    _log(
        {
            "stage": "train",
            "event": "done",
            "kind": kind,
            "train_seconds": model.train_seconds_,
        }
    )
    return EXIT_OK


def _cmd_tune(args) -> int:
    train_ds = Dataset.load(args.train)
    val_ds = Dataset.load(args.validation)
    cfg = _load_model_config(args.config)
    model_cfg = cfg.get("model", {})
    hpo_cfg = cfg.get("hpo")
    if not hpo_cfg or not hpo_cfg.get("space"):
        raise ConfigError("tune requires an hpo section with a non-empty space")
    kind = model_cfg.get("kind", "random_forest")
    base_params = dict(model_cfg.get("params", {}))
    space = SearchSpace.from_dicts(hpo_cfg["space"])
    tpe = hpo_cfg.get("tpe", {})
    tpe_cfg = TpeConfig(
        gamma=tpe.get("gamma", 0.25),
        n_startup=tpe.get("n_startup", 10),
        n_candidates=tpe.get("n_candidates", 24),
        seed=derive_seed(args.seed, "tune"),
    )
    train_seed = derive_seed(args.seed, "train")

    def objective(config):
        params = dict(base_params)
        params.update(config)
        model = build_model(kind, params, train_seed)
        if kind == "cnn":
            model.fit(train_ds.features, train_ds.labels, n_classes=len(train_ds.label_map))
        else:
            model.fit(train_ds.features, train_ds.labels)
        return float((model.predict(val_ds.features) == val_ds.labels).mean())

    best_config, best_score, history = optimize(
        objective, space, hpo_cfg.get("budget", 30), tpe_cfg
    )
    out = _stage_dir(args.out, "tune")
    _write_json(os.path.join(out, "best.json"), {"config": best_config, "score": best_score})
    history.to_jsonl(os.path.join(out, "trials.jsonl"))
    _log({"stage": "tune", "event": "done", "best_score": best_score})
    print(json.dumps({"best_config": best_config, "best_score": best_score}, sort_keys=True))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model, label_map = load_model(args.model)
    test_ds = Dataset.load(args.test)
    predictions = model.predict(test_ds.features)
    cm = confusion(
        test_ds.labels, predictions, len(label_map), class_names=list(label_map.class_names)
    )
    m = metrics(cm)
    report, text = render_report(
        [{"name": args.name, "metrics": m, "train_seconds": model.train_seconds_}]
    )
    report["accuracy"] = float(np.trace(cm.counts) / cm.total)
    out = _stage_dir(args.out, "evaluate")
    _write_json(os.path.join(out, "report.json"), report)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.verbose = args.verbose or cfg.verbose
    summary = run_hpo_comparison(cfg) if args.compare else run_pipeline(cfg)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser wiring


def _add_common(p: argparse.ArgumentParser, out_default: str = "runs") -> None:
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--config", default=None, help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nidskit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark CSV")
    _add_common(p)
    p.add_argument("--classes", type=int, default=BENCHMARK.n_classes)
    p.add_argument(
        "--rows-per-class",
        default=",".join(str(r) for r in BENCHMARK.rows_per_class),
        help="comma-separated row counts, one per class",
    )
    p.add_argument("--features", type=int, default=BENCHMARK.n_features)
    p.add_argument("--informative", type=int, default=BENCHMARK.n_informative)
    p.add_argument("--redundant", type=int, default=BENCHMARK.n_redundant)
    p.add_argument("--separation", type=float, default=BENCHMARK.separation)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("ingest", help="load a CSV, clean it, store the dataset artifact")
    _add_common(p)
    p.add_argument("--input", required=True, help="CSV file")
    p.add_argument("--label-column", default="Label")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("preprocess", help="min-max scale a dataset artifact")
    _add_common(p)
    p.add_argument("--input", required=True, help="dataset artifact (JSON)")
    p.set_defaults(handler=_cmd_preprocess)

    p = sub.add_parser("select", help="FCBF feature selection")
    _add_common(p)
    p.add_argument("--input", required=True, help="dataset artifact (JSON)")
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(handler=_cmd_select)

    p = sub.add_parser("reduce", help="PCA projection")
    _add_common(p)
    p.add_argument("--input", required=True, help="dataset artifact (JSON)")
    p.add_argument("--components", type=int, default=None)
    p.add_argument("--variance", type=float, default=None)
    p.set_defaults(handler=_cmd_reduce)

    p = sub.add_parser("balance", help="K-means + SMOTE class balancing")
    _add_common(p)
    p.add_argument("--input", required=True, help="dataset artifact (JSON)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--smote-k", type=int, default=5)
    p.add_argument("--policy", choices=["match_majority", "explicit_factor"],
                   default="match_majority")
    p.add_argument("--factor", type=float, default=None)
    p.set_defaults(handler=_cmd_balance)

    p = sub.add_parser("split", help="train/validation/test partition")
    _add_common(p)
    p.add_argument("--input", required=True, help="dataset artifact (JSON)")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--validation-fraction", type=float, default=0.2)
    p.add_argument("--no-stratify", action="store_true")
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("train", help="train a classifier on a dataset artifact")
    _add_common(p)
    p.add_argument("--train", required=True, help="training dataset artifact")
    p.add_argument("--validation", default=None, help="validation dataset artifact")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("tune", help="TPE hyperparameter search")
    _add_common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--validation", required=True)
    p.set_defaults(handler=_cmd_tune)

    p = sub.add_parser("evaluate", help="score a trained model on a test artifact")
    _add_common(p)
    p.add_argument("--model", required=True, help="model artifact (JSON)")
    p.add_argument("--test", required=True, help="test dataset artifact")
    p.add_argument("--name", default="model")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full configured pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out", default=None, help="override config output dir")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--compare", action="store_true",
                   help="run the with/without-HPO comparison instead")
    p.set_defaults(handler=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NidskitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:  # noqa: BLE001 - map anything else to stage failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
