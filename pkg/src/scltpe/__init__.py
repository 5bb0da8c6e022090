"""Supervised contrastive learning for imbalanced tabular data, with the
contrastive temperature chosen by a Tree-structured Parzen Estimator."""

from .config import ExperimentConfig, build_config, load_config
from .data import Dataset, bundled_path, load_dataset, load_keel
from .exceptions import SclTpeError
from .hpo import TpeConfig, ga_search, grid_search, random_search, tpe_optimize
from .metrics import auc_binary, mauc, report
from .pipeline import PipelineConfig, make_objective, make_splits, train_model
from .scl import selfsup_loss, supcon_loss

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ExperimentConfig", "PipelineConfig", "SclTpeError", "TpeConfig",
    "auc_binary", "build_config", "bundled_path", "ga_search", "grid_search",
    "load_config", "load_dataset", "load_keel", "make_objective", "make_splits",
    "mauc", "random_search", "report", "selfsup_loss", "supcon_loss",
    "tpe_optimize", "train_model",
]
