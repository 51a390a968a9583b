"""Synthetic NetFlow-style benchmark data for desk-scale testing.

Classes are Gaussian clusters in the informative coordinates; redundant
columns are noisy copies of informative ones (so feature selection has
something to prune) and noise columns carry no class signal. Row counts per
class are caller-controlled, so imbalance is configurable. The generator is
bit-deterministic for a given seed, and ground truth about column roles is
emitted alongside the data for test assertions.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, LabelMap

__all__ = ["SynthSpec", "BENCHMARK", "generate_synthetic", "write_synthetic_csv"]

_REDUNDANT_NOISE_SCALE = 0.05


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int
    rows_per_class: tuple[int, ...]
    n_features: int
    n_informative: int
    n_redundant: int
    separation: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.n_features < 2:
            raise ValueError("n_features must be >= 2")
        if len(self.rows_per_class) != self.n_classes:
            raise ValueError("rows_per_class must have n_classes entries")
        if any(r < 1 for r in self.rows_per_class):
            raise ValueError("every class needs at least 1 row")
        if self.n_informative < 1:
            raise ValueError("n_informative must be >= 1")
        if self.n_informative + self.n_redundant > self.n_features:
            raise ValueError("informative + redundant exceeds n_features")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")


# the 870-row / 5-class imbalanced set used by the acceptance suite
BENCHMARK = SynthSpec(
    n_classes=5,
    rows_per_class=(500, 200, 100, 50, 20),
    n_features=12,
    n_informative=6,
    n_redundant=3,
    separation=3.0,
    seed=2017,
)


def generate_synthetic(spec: SynthSpec) -> tuple[Dataset, dict]:
    """Build the dataset in memory; returns (dataset, ground-truth metadata)."""
    rng = np.random.default_rng(spec.seed)
    n_noise = spec.n_features - spec.n_informative - spec.n_redundant
    centers = spec.separation * rng.standard_normal((spec.n_classes, spec.n_informative))

    blocks = []
    labels = []
    for c in range(spec.n_classes):
        n = spec.rows_per_class[c]
        informative = centers[c] + rng.standard_normal((n, spec.n_informative))
        blocks.append(informative)
        labels.append(np.full(n, c, dtype=np.int64))
    informative_all = np.vstack(blocks)
    y = np.concatenate(labels)

    redundant_src = [j % spec.n_informative for j in range(spec.n_redundant)]
    redundant = np.column_stack(
        [
            informative_all[:, src]
            + _REDUNDANT_NOISE_SCALE * rng.standard_normal(informative_all.shape[0])
            for src in redundant_src
        ]
    ) if spec.n_redundant else np.empty((informative_all.shape[0], 0))
    noise = rng.standard_normal((informative_all.shape[0], n_noise))

    X = np.hstack([informative_all, redundant, noise])
    names = [f"feat_{j:02d}" for j in range(spec.n_features)]
    width = len(str(spec.n_classes - 1))
    class_names = [f"class_{c:0{width}d}" for c in range(spec.n_classes)]
    label_map = LabelMap.from_names(class_names)

    metadata = {
        "seed": spec.seed,
        "separation": spec.separation,
        "rows_per_class": {class_names[c]: spec.rows_per_class[c] for c in range(spec.n_classes)},
        "informative": names[: spec.n_informative],
        "redundant": {
            names[spec.n_informative + j]: names[src] for j, src in enumerate(redundant_src)
        },
        "noise": names[spec.n_informative + spec.n_redundant :],
    }
    return Dataset(X, names, y, label_map), metadata


def write_synthetic_csv(spec: SynthSpec, out_dir: str, label_column: str = "Label") -> dict:
    """Write data.csv and metadata.json under out_dir; returns metadata
    (with file paths added)."""
    dataset, metadata = generate_synthetic(spec)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "data.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + [label_column])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [dataset.label_map.decode(label)])
    meta_path = os.path.join(out_dir, "metadata.json")
    metadata = dict(metadata, csv_path=csv_path)
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, sort_keys=True, indent=2)
    return metadata
