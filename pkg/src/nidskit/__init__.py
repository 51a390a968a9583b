"""NetFlow intrusion-detection pipeline toolkit.

Estimator-style building blocks (MinMaxNormalizer, FcbfSelector,
PrincipalComponents, KMeansSmote, RandomForestModel, ConvNetClassifier)
compose with the wider scikit-learn ecosystem; the pipeline module wires
them into a reproducible, cached, configuration-driven run.
"""

from .balance import BalanceConfig, KMeansSmote, balance_dataset, kmeans, smote_oversample
from .dataset import (
    CleanReport,
    Dataset,
    LabelMap,
    SplitSpec,
    clean,
    load_csv,
    one_hot,
    split,
)
from .errors import ConfigError, DataError, DivergenceError, NidskitError, StageError
from .evaluate import ConfusionMatrix, confusion, metrics, render_report
from .fcbf import FcbfSelector, FeatureSubset, fcbf_select, symmetrical_uncertainty
from .hpo import SearchSpace, TpeConfig, TrialHistory, optimize, sample_uniform, suggest
from .models import ConvNetClassifier, RandomForestModel, load_model, save_model
from .normalize import MinMaxNormalizer, NormStats, histogram, pearson_correlation
from .pca import PcaModel, PrincipalComponents, fit_pca
from .pipeline import PipelineConfig, run_hpo_comparison, run_pipeline
from .synth import BENCHMARK, SynthSpec, generate_synthetic, write_synthetic_csv

__version__ = "0.1.0"

__all__ = [
    "BalanceConfig",
    "KMeansSmote",
    "balance_dataset",
    "kmeans",
    "smote_oversample",
    "CleanReport",
    "Dataset",
    "LabelMap",
    "SplitSpec",
    "clean",
    "load_csv",
    "one_hot",
    "split",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "NidskitError",
    "StageError",
    "ConfusionMatrix",
    "confusion",
    "metrics",
    "render_report",
    "FcbfSelector",
    "FeatureSubset",
    "fcbf_select",
    "symmetrical_uncertainty",
    "SearchSpace",
    "TpeConfig",
    "TrialHistory",
    "optimize",
    "sample_uniform",
    "suggest",
    "ConvNetClassifier",
    "RandomForestModel",
    "load_model",
    "save_model",
    "MinMaxNormalizer",
    "NormStats",
    "histogram",
    "pearson_correlation",
    "PcaModel",
    "PrincipalComponents",
    "fit_pca",
    "PipelineConfig",
    "run_hpo_comparison",
    "run_pipeline",
    "SynthSpec",
    "BENCHMARK",
    "generate_synthetic",
    "write_synthetic_csv",
    "__version__",
]
