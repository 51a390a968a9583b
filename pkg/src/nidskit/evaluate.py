"""Confusion matrices, per-class and macro metrics, and report rendering.

Per-class values come from the one-vs-rest reduction of the multi-class
confusion matrix: TP is the diagonal entry, FP the rest of the column, FN
the rest of the row, TN everything else. Accuracy is (TP+TN)/total,
precision TP/(TP+FP), recall TP/(TP+FN), and F1 the harmonic mean of the
two. Zero denominators yield 0.0 (footnoted in text output) so the report
stays totalable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import as_int_labels

__all__ = [
    "ConfusionMatrix",
    "PerClassMetrics",
    "ClassMetrics",
    "confusion",
    "metrics",
    "render_report",
]


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class
    class_names: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.class_names)
        if self.counts.shape != (n, n):
            raise ValueError(f"counts must be {n}x{n}")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class PerClassMetrics:
    class_name: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    zero_denominators: list[str] = field(default_factory=list)


@dataclass
class ClassMetrics:
    per_class: list[PerClassMetrics]
    macro_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


def confusion(y_true, y_pred, n_classes: int, class_names=None) -> ConfusionMatrix:
    """Count matrix with counts[i][j] = |{t : true=i and predicted=j}|."""
    yt = as_int_labels(y_true, "y_true")
    yp = as_int_labels(y_pred, "y_pred")
    if yt.shape[0] != yp.shape[0]:
        raise ValueError(f"length mismatch: {yt.shape[0]} vs {yp.shape[0]}")
    if yt.size and max(int(yt.max()), int(yp.max())) >= n_classes:
        raise ValueError("label out of range")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (yt, yp), 1)
    names = list(class_names) if class_names is not None else [
        str(c) for c in range(n_classes)
    ]
    return ConfusionMatrix(counts, names)


def metrics(cm: ConfusionMatrix) -> ClassMetrics:
    total = cm.total
    if total == 0:
        raise ValueError("cannot compute metrics of an empty confusion matrix")
    per_class = []
    for c, name in enumerate(cm.class_names):
        tp = int(cm.counts[c, c])
        fp = int(cm.counts[:, c].sum()) - tp
        fn = int(cm.counts[c, :].sum()) - tp
        tn = total - tp - fp - fn
        flags = []
        accuracy = (tp + tn) / total
        if tp + fp > 0:
            precision = tp / (tp + fp)
        else:
            precision = 0.0
            flags.append("precision")
        if tp + fn > 0:
            recall = tp / (tp + fn)
        else:
            recall = 0.0
            flags.append("recall")
        if precision + recall > 0:
            f1 = 2.0 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
            flags.append("f1")
        per_class.append(PerClassMetrics(name, accuracy, precision, recall, f1, flags))
    n = len(per_class)
    return ClassMetrics(
        per_class=per_class,
        macro_accuracy=sum(m.accuracy for m in per_class) / n,
        macro_precision=sum(m.precision for m in per_class) / n,
        macro_recall=sum(m.recall for m in per_class) / n,
        macro_f1=sum(m.f1 for m in per_class) / n,
    )


def _metrics_to_dict(name: str, cm_metrics: ClassMetrics, train_seconds: float) -> dict:
    return {
        "name": name,
        "per_class": [
            {
                "class": m.class_name,
                "accuracy": m.accuracy,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
            }
            for m in cm_metrics.per_class
        ],
        "macro": {
            "accuracy": cm_metrics.macro_accuracy,
            "precision": cm_metrics.macro_precision,
            "recall": cm_metrics.macro_recall,
            "f1": cm_metrics.macro_f1,
        },
        "train_seconds": train_seconds,
    }


def _format_table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def render_report(results: list[dict], comparison: dict | None = None) -> tuple[dict, str]:
    """Build the machine-readable report and its plain-text rendering.

    ``results`` entries: {"name": str, "metrics": ClassMetrics,
    "train_seconds": float}. ``comparison`` (optional) carries the tuned vs
    untuned pair: {"classifier": str, "without_hpo": {...}, "with_hpo": {...}}
    with train_seconds/accuracy/f1 in each leg.
    """
    if not results:
        raise ValueError("results must be non-empty")
    report = {
        "models": [
            _metrics_to_dict(r["name"], r["metrics"], r.get("train_seconds", 0.0))
            for r in results
        ]
    }
    if comparison is not None:
        report["comparison"] = comparison

    sections = []
    footnote_needed = False
    for r in results:
        m: ClassMetrics = r["metrics"]
        rows = [["Class", "Accuracy", "Precision", "Recall", "F1"]]
        for pc in m.per_class:
            cells = [pc.class_name]
            for metric_name, value in (
                ("accuracy", pc.accuracy),
                ("precision", pc.precision),
                ("recall", pc.recall),
                ("f1", pc.f1),
            ):
                marker = "*" if metric_name in pc.zero_denominators else ""
                if marker:
                    footnote_needed = True
                cells.append(f"{value:.4f}{marker}")
            rows.append(cells)
        rows.append(
            [
                "Average",
                f"{m.macro_accuracy:.4f}",
                f"{m.macro_precision:.4f}",
                f"{m.macro_recall:.4f}",
                f"{m.macro_f1:.4f}",
            ]
        )
        sections.append(f"== {r['name']} ==\n" + _format_table(rows))

    if comparison is not None:
        rows = [["Data", "Classifier", "TrainingTime(s)", "Accuracy", "F1-Measure"]]
        for label, key in (("W/oHPO", "without_hpo"), ("W/HPO", "with_hpo")):
            leg = comparison[key]
            rows.append(
                [
                    label,
                    comparison["classifier"],
                    f"{leg['train_seconds']:.1f}",
                    f"{leg['accuracy']:.4f}",
                    f"{leg['f1']:.4f}",
                ]
            )
        sections.append("== HPO comparison ==\n" + _format_table(rows))

    if footnote_needed:
        sections.append("* undefined (zero denominator); reported as 0")
    return report, "\n\n".join(sections)
