"""End-to-end training run for one temperature, and the tuning objective."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .classifier import ClassifierParams, ClassifierSpec, predict_proba, train_classifier
from .data import Dataset, NormalizationStats, stratified_split, zscore_apply, zscore_fit
from .exceptions import ConfigError, DimensionError, NumericalError
from .metrics import MetricsReport, report
from .scl import ContrastiveTrainConfig, EncoderParams, EncoderSpec, identity_spec, train_encoder

log = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.25


@dataclass(frozen=True)
class PipelineConfig:
    encoder_widths: tuple[int, ...] = (9, 96, 48)
    classifier_widths: tuple[int, ...] = (48, 24, 2)
    batch_size: int = 160
    contrastive_epochs: int = 5000
    classifier_epochs: int = 25
    lr: float = 0.001
    sigma: float = 0.1
    loss_kind: str = "supervised"
    normalize_output: bool = True
    steps_per_epoch: int = 1
    raw_features: bool = False  # skip the encoder: the plain MLP baseline

    def validate(self, ds: Dataset | None = None):
        enc = self.effective_encoder_widths(ds.d if ds is not None else None)
        if enc[-1] != self.classifier_widths[0]:
            raise ConfigError(
                f"classifier_widths[0]={self.classifier_widths[0]} must equal the encoder "
                f"output width {enc[-1]}"
            )
        if ds is not None:
            if enc[0] != ds.d:
                raise ConfigError(
                    f"encoder_widths[0]={enc[0]} but the dataset has {ds.d} features"
                )
            if self.classifier_widths[-1] != ds.n_classes:
                raise ConfigError(
                    f"classifier_widths[-1]={self.classifier_widths[-1]} but the dataset "
                    f"has {ds.n_classes} classes"
                )
        # constructing the component configs runs their own checks
        ContrastiveTrainConfig(
            epochs=self.contrastive_epochs, batch_size=self.batch_size, lr=self.lr,
            sigma=self.sigma, loss_kind=self.loss_kind, steps_per_epoch=self.steps_per_epoch,
        )
        ClassifierSpec(self.classifier_widths, self.classifier_epochs, self.batch_size, self.lr)

    def effective_encoder_widths(self, d=None):
        if self.raw_features:
            return (d if d is not None else self.encoder_widths[0],)
        return tuple(self.encoder_widths)


@dataclass(frozen=True)
class Splits:
    """Normalized train / tuning / test sets; statistics come from ``train`` only."""

    train: Dataset
    tune: Dataset
    test: Dataset
    stats: NormalizationStats
    tune_split: str = "test"


def make_splits(ds: Dataset, test_fraction: float, seed: int, tune_split: str = "test") -> Splits:
    if tune_split not in ("test", "validation"):
        raise ConfigError(f"tune_split must be 'test' or 'validation', got {tune_split!r}")
    train, test = stratified_split(ds, test_fraction, seeding.stream(seed, "split"))
    if tune_split == "validation":
        train, tune = stratified_split(train, VALIDATION_FRACTION, seeding.stream(seed, "split-validation"))
    stats = zscore_fit(train)
    train_n = zscore_apply(stats, train)
    test_n = zscore_apply(stats, test)
    tune_n = test_n if tune_split == "test" else zscore_apply(stats, tune)
    return Splits(train_n, tune_n, test_n, stats, tune_split)


@dataclass
class Model:
    encoder: EncoderParams
    head: ClassifierParams
    stats: NormalizationStats
    class_names: tuple[str, ...]
    positive_class: int
    tau: float

    def normalize(self, X_raw) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X_raw, dtype=np.float64))
        if X.shape[1] != self.stats.mean.shape[0]:
            raise DimensionError(f"model expects {self.stats.mean.shape[0]} features, got {X.shape[1]}")
        return (X - self.stats.mean) / self.stats.std

    def proba(self, X_raw) -> np.ndarray:
        """Class probabilities for un-normalized feature rows."""
        return self.proba_normalized(self.normalize(X_raw))

    def proba_normalized(self, X) -> np.ndarray:
        return predict_proba(self.encoder, self.head, X)

    def evaluate(self, ds_normalized: Dataset) -> MetricsReport:
        proba = self.proba_normalized(ds_normalized.X)
        return report(proba, ds_normalized.y, positive_class=self._pos())

    def _pos(self):
        return self.positive_class if len(self.class_names) == 2 else None


def train_model(tau: float, splits: Splits, cfg: PipelineConfig, seed: int) -> Model:
    """Contrastive pretraining at ``tau`` followed by the softmax head."""
    train = splits.train
    if cfg.raw_features:
        enc_spec = identity_spec(train.d)
    else:
        enc_spec = EncoderSpec(cfg.encoder_widths, tau=tau, normalize_output=cfg.normalize_output)
    enc_cfg = ContrastiveTrainConfig(
        epochs=cfg.contrastive_epochs, batch_size=cfg.batch_size, lr=cfg.lr,
        sigma=cfg.sigma, seed=seed, loss_kind=cfg.loss_kind, steps_per_epoch=cfg.steps_per_epoch,
    )
    encoder = train_encoder(train, enc_spec, enc_cfg)
    head_widths = cfg.classifier_widths
    if cfg.raw_features:
        head_widths = (train.d,) + tuple(head_widths[1:])
    head_spec = ClassifierSpec(head_widths, cfg.classifier_epochs, cfg.batch_size, cfg.lr, seed)
    head = train_classifier(encoder, train, head_spec)
    return Model(encoder, head, splits.stats, train.class_names, train.minority_class(), tau)


def objective_eval(tau: float, cfg: PipelineConfig, splits: Splits, seed: int) -> float:
    """Negative AUC (MAUC for multi-class) on the tuning split.

    A run that diverges numerically scores 0, i.e. chance-level AUC.
    """
    try:
        model = train_model(tau, splits, cfg, seed)
        return -model.evaluate(splits.tune).auc_or_mauc
    except NumericalError as exc:
        log.warning("tau=%.4f seed=%d failed: %s", tau, seed, exc)
        return 0.0


def make_objective(cfg: PipelineConfig, splits: Splits):
    def objective(tau, seed):
        return objective_eval(tau, cfg, splits, seed)
    return objective
