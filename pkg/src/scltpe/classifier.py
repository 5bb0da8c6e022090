"""Softmax head trained on frozen encoder embeddings."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .data import Dataset, sample_batch
from .exceptions import ConfigError, DimensionError, NumericalError
from .numcore import AdamHyper, Dense, adam_step, as_matrix, build_mlp, mlp_backward, mlp_forward, mlp_params
from .scl import EncoderParams, encode


@dataclass(frozen=True)
class ClassifierSpec:
    """Head layout ``(h2, m, C)``: linear, ReLU, linear, softmax.

    One epoch is ``ceil(n / batch_size)`` with-replacement batches, so the
    number of Adam steps is ``epochs * ceil(n / batch_size)``.
    """

    layer_widths: tuple[int, ...]
    epochs: int = 25
    batch_size: int = 160
    lr: float = 0.001
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ConfigError(f"classifier widths must be >= 1 with at least 2 entries, got {widths}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def n_classes(self) -> int:
        return self.layer_widths[-1]


@dataclass
class ClassifierParams:
    spec: ClassifierSpec
    layers: list[Dense]
    loss_trace: list[float] = field(default_factory=list)

    def params(self):
        return mlp_params(self.layers)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    logits = as_matrix(logits, "logits")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n = logits.shape[0]
    if labels.shape[0] != n:
        raise DimensionError(f"{n} rows of logits but {labels.shape[0]} labels")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = -float(np.mean(log_p[np.arange(n), labels]))
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def softmax(logits) -> np.ndarray:
    logits = as_matrix(logits, "logits")
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def init_classifier(spec: ClassifierSpec, rng: np.random.Generator) -> ClassifierParams:
    return ClassifierParams(spec, build_mlp(spec.layer_widths, rng))


def train_classifier(encoder: EncoderParams, train: Dataset, spec: ClassifierSpec) -> ClassifierParams:
    """Fit the head with cross-entropy on the (frozen) embeddings of ``train``."""
    if spec.layer_widths[0] != encoder.spec.out_dim:
        raise DimensionError(
            f"head input {spec.layer_widths[0]} != encoder output {encoder.spec.out_dim}"
        )
    if spec.n_classes != train.n_classes:
        raise DimensionError(f"head has {spec.n_classes} outputs, dataset has {train.n_classes} classes")
    head = init_classifier(spec, seeding.stream(spec.seed, "classifier"))
    if spec.epochs == 0:
        return head
    Z = encode(encoder, train.X)  # encoder is frozen: embed once
    rng = seeding.stream(spec.seed, "classifier_batch")
    hyper = AdamHyper(lr=spec.lr)
    tensors = head.params()
    steps = max(1, math.ceil(train.n / spec.batch_size))
    for epoch in range(spec.epochs):
        total = 0.0
        for _ in range(steps):
            idx = sample_batch(train, spec.batch_size, rng)
            logits, cache = mlp_forward(head.layers, Z[idx])
            loss, dlogits = cross_entropy(logits, train.y[idx])
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite classifier loss {loss} at epoch {epoch}")
            mlp_backward(head.layers, cache, dlogits)
            for p in tensors:
                adam_step(p, hyper)
            total += loss
        head.loss_trace.append(total / steps)
    return head


def head_proba(head: ClassifierParams, Z) -> np.ndarray:
    Z = as_matrix(Z, "Z")
    if Z.shape[0] == 0:
        return np.zeros((0, head.spec.n_classes))
    if Z.shape[1] != head.spec.layer_widths[0]:
        raise DimensionError(f"head expects {head.spec.layer_widths[0]} inputs, got {Z.shape[1]}")
    logits, _ = mlp_forward(head.layers, Z)
    return softmax(logits)


def predict_proba(encoder: EncoderParams, head: ClassifierParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2 and X.shape[0] == 0:
        if X.shape[1] != encoder.spec.in_dim:
            raise DimensionError(f"encoder expects {encoder.spec.in_dim} features, got {X.shape[1]}")
        return np.zeros((0, head.spec.n_classes))
    return head_proba(head, encode(encoder, X))


def predict_from_proba(proba) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index.
    proba = np.asarray(proba)
    if proba.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmax(proba, axis=1).astype(np.int64)


def predict(encoder: EncoderParams, head: ClassifierParams, X) -> np.ndarray:
    return predict_from_proba(predict_proba(encoder, head, X))


def write_proba_csv(proba, y_true, path, class_names=None):
    """Rows of ``id, p_0..p_{C-1}, predicted, true``."""
    proba = np.asarray(proba)
    C = proba.shape[1]
    names = class_names or [str(c) for c in range(C)]
    pred = predict_from_proba(proba)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"p_{n}" for n in names] + ["predicted", "true"])
        for i in range(proba.shape[0]):
            w.writerow([i] + [repr(float(v)) for v in proba[i]] + [int(pred[i]), int(y_true[i])])
