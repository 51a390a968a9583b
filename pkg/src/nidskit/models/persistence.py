"""Self-describing JSON container for trained models."""

from __future__ import annotations

import json

from ..dataset import LabelMap
from ..errors import DataError
from .cnn import ConvNetClassifier
from .forest import RandomForestModel

FORMAT_VERSION = 1

_KINDS = {"random_forest": RandomForestModel, "cnn": ConvNetClassifier}


def model_kind(model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise ValueError(f"unsupported model type: {type(model).__name__}")


def save_model(model, label_map: LabelMap, path: str) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": model_kind(model),
        "hyperparameters": model.get_params(),
        "label_map": label_map.to_dict(),
        "train_seconds": getattr(model, "train_seconds_", 0.0),
        "state": model.weights_to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_model(path: str):
    """Returns (model, label_map)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version: {version}")
    kind = payload.get("kind")
    if kind not in _KINDS:
        raise DataError(f"unknown model kind: {kind}")
    params = dict(payload["hyperparameters"])
    if kind == "cnn" and "conv_blocks" in params:
        params["conv_blocks"] = tuple(tuple(b) for b in params["conv_blocks"])
    model = _KINDS[kind](**params)
    model.weights_from_dict(payload["state"])
    model.train_seconds_ = payload.get("train_seconds", 0.0)
    return model, LabelMap.from_dict(payload["label_map"])
