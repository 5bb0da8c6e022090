"""Contrastive encoder: network, supervised / self-supervised losses, training."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .data import Dataset, augment_two_views, sample_batch
from .exceptions import ConfigError, DimensionError, NumericalError
from .numcore import (
    AdamHyper,
    Dense,
    adam_step,
    as_matrix,
    build_mlp,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    mlp_backward,
    mlp_forward,
    mlp_params,
)

log = logging.getLogger(__name__)

LOSS_KINDS = ("supervised", "self_supervised")


@dataclass(frozen=True)
class EncoderSpec:
    """Encoder layout, e.g. ``(9, 96, 48)``: ReLU hidden layers, linear output.

    A single width ``(d,)`` is the identity encoder (raw features).
    """

    layer_widths: tuple[int, ...]
    tau: float = 0.5
    normalize_output: bool = True

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if not widths or min(widths) < 1:
            raise ConfigError(f"encoder widths must be >= 1, got {self.layer_widths}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def in_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def out_dim(self) -> int:
        return self.layer_widths[-1]


def identity_spec(d: int) -> EncoderSpec:
    return EncoderSpec((d,), tau=1.0, normalize_output=False)


@dataclass
class EncoderParams:
    spec: EncoderSpec
    layers: list[Dense]
    loss_trace: list[float] = field(default_factory=list)

    def params(self):
        return mlp_params(self.layers)

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.spec, [l.copy() for l in self.layers], list(self.loss_trace))


@dataclass(frozen=True)
class ContrastiveTrainConfig:
    epochs: int = 5000
    batch_size: int = 160
    lr: float = 0.001
    sigma: float = 0.1
    seed: int = 0
    loss_kind: str = "supervised"
    steps_per_epoch: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.steps_per_epoch < 1:
            raise ConfigError(f"steps_per_epoch must be >= 1, got {self.steps_per_epoch}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")


def init_encoder(spec: EncoderSpec, rng: np.random.Generator) -> EncoderParams:
    return EncoderParams(spec, build_mlp(spec.layer_widths, rng))


def _forward(params: EncoderParams, X):
    X = as_matrix(X, "X")
    if X.shape[1] != params.spec.in_dim:
        raise DimensionError(f"encoder expects {params.spec.in_dim} features, got {X.shape[1]}")
    raw, cache = mlp_forward(params.layers, X)
    if params.spec.normalize_output:
        Z, norms = l2_normalize_rows(raw)
        return Z, (cache, Z, norms)
    return raw, (cache, None, None)


def _backward(params: EncoderParams, cache, dZ):
    mlp_cache, Z, norms = cache
    d = dZ if Z is None else l2_normalize_rows_backward(Z, norms, dZ)
    return mlp_backward(params.layers, mlp_cache, d)


def encode(params: EncoderParams, X) -> np.ndarray:
    """Embeddings of ``X``; rows are unit-norm when ``normalize_output`` is set."""
    return _forward(params, X)[0]


# --------------------------------------------------------------------------
# losses


def _contrastive(Z, pos_mask, tau):
    # Anchors without positives are skipped (their term would be 0/0).
    if not tau > 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    Z = as_matrix(Z, "Z")
    n = Z.shape[0]
    if n < 2:
        raise ValueError("contrastive loss needs at least two rows")
    S = (Z / tau) @ Z.T
    E = S.copy()
    np.fill_diagonal(E, -np.inf)
    row_max = E.max(axis=1)
    E -= row_max[:, None]
    np.exp(E, out=E)
    denom = E.sum(axis=1)
    lse = row_max + np.log(denom)
    E /= denom[:, None]  # softmax over a != i

    pos = pos_mask.astype(np.float64)
    np.fill_diagonal(pos, 0.0)
    npos = pos.sum(axis=1)
    valid = npos > 0
    inv = np.divide(1.0, npos, out=np.zeros_like(npos), where=valid)
    pos_mean = np.einsum("ij,ij->i", pos, S) * inv
    loss = float(np.sum((lse - pos_mean)[valid]))

    pos *= inv[:, None]
    G = E
    G -= pos
    G[~valid] = 0.0
    dZ = ((G + G.T) @ Z) / tau
    if not np.isfinite(loss) or not np.all(np.isfinite(dZ)):
        raise NumericalError(f"non-finite contrastive loss ({loss}) at tau={tau}")
    return loss, dZ


def supcon_loss(Z, labels, tau):
    """Supervised contrastive loss (summed over anchors) and its gradient.

    Every other row with the anchor's label is a positive; all other rows form
    the softmax denominator.
    """
    labels = np.asarray(labels).reshape(-1)
    Z = as_matrix(Z, "Z")
    if labels.shape[0] != Z.shape[0]:
        raise DimensionError(f"{Z.shape[0]} embeddings but {labels.shape[0]} labels")
    return _contrastive(Z, labels[:, None] == labels[None, :], tau)


def selfsup_loss(Z, pair_map, tau):
    """Self-supervised contrastive loss: the single positive of row i is ``pair_map[i]``."""
    pair_map = np.asarray(pair_map, dtype=np.int64).reshape(-1)
    Z = as_matrix(Z, "Z")
    n = Z.shape[0]
    if pair_map.shape[0] != n:
        raise DimensionError(f"{n} embeddings but pair map of length {pair_map.shape[0]}")
    if np.any(pair_map == np.arange(n)) or pair_map.min() < 0 or pair_map.max() >= n:
        raise ValueError("pair map must point every row at a different row")
    mask = np.zeros((n, n), dtype=bool)
    mask[np.arange(n), pair_map] = True
    return _contrastive(Z, mask, tau)


def contrastive_loss(kind, Z, batch, tau):
    if kind == "supervised":
        return supcon_loss(Z, batch.y, tau)
    if kind == "self_supervised":
        return selfsup_loss(Z, batch.pair_map, tau)
    raise ConfigError(f"unknown loss kind {kind!r}")


# --------------------------------------------------------------------------
# training


def train_encoder(train: Dataset, spec: EncoderSpec, cfg: ContrastiveTrainConfig) -> EncoderParams:
    """Pretrain the encoder on two-view augmented batches of normalized ``train``."""
    if train.d != spec.in_dim:
        raise DimensionError(f"encoder expects {spec.in_dim} features, dataset has {train.d}")
    params = init_encoder(spec, seeding.stream(cfg.seed, "init"))
    if not params.layers:
        return params
    batch_rng = seeding.stream(cfg.seed, "batch")
    aug_rng = seeding.stream(cfg.seed, "augment")
    hyper = AdamHyper(lr=cfg.lr)
    tensors = params.params()
    for epoch in range(cfg.epochs):
        for _ in range(cfg.steps_per_epoch):
            idx = sample_batch(train, cfg.batch_size, batch_rng)
            batch = augment_two_views(train, idx, cfg.sigma, aug_rng)
            try:
                Z, cache = _forward(params, batch.X)
                loss, dZ = contrastive_loss(cfg.loss_kind, Z, batch, spec.tau)
                _backward(params, cache, dZ)
                for p in tensors:
                    adam_step(p, hyper)
            except (NumericalError, ArithmeticError, ValueError) as exc:
                last = params.loss_trace[-1] if params.loss_trace else float("nan")
                raise NumericalError(
                    f"encoder training failed at epoch {epoch} (last loss {last}): {exc}"
                ) from exc
        params.loss_trace.append(loss)
    return params


def write_loss_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(trace):
            w.writerow([i, repr(float(v))])
