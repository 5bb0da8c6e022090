"""Random over/under-sampling, SMOTE, and a brute-force KNN classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import seeding
from .data import Dataset

log = logging.getLogger(__name__)

SAMPLERS = ("none", "ros", "rus", "smote")


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "smote"
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind.lower() not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.kind!r}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


def ros(ds: Dataset, seed) -> Dataset:
    """Replicate rows of every smaller class (with replacement) up to the majority count."""
    rng = seeding.stream(seed, "resample")
    counts = ds.class_counts
    target = counts.max()
    extra = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y == c)
        if members.size and members.size < target:
            extra.append(rng.choice(members, size=target - members.size, replace=True))
    idx = np.concatenate([np.arange(ds.n)] + extra)
    return ds.subset(idx)


def rus(ds: Dataset, seed) -> Dataset:
    """Drop rows of every larger class (without replacement) down to the minority count."""
    rng = seeding.stream(seed, "resample")
    counts = ds.class_counts
    target = counts[counts > 0].min()
    keep = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y == c)
        if members.size:
            keep.append(np.sort(rng.choice(members, size=target, replace=False)))
    return ds.subset(np.sort(np.concatenate(keep)))


def _neighbors(points, k):
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote_with_pairs(ds: Dataset, k: int = 5, seed=0):
    """SMOTE that also reports how each synthetic row was generated.

    Returns ``(resampled, pairs)`` where ``pairs`` has one row
    ``(source_index, neighbor_index, lam)`` per synthetic sample, indices
    referring to rows of ``ds``. Synthetic rows are appended after the
    originals in the same order as ``pairs``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = seeding.stream(seed, "resample")
    counts = ds.class_counts
    target = counts.max()
    new_X, new_y, pairs = [], [], []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y == c)
        need = target - members.size
        if members.size == 0 or need <= 0:
            continue
        if members.size == 1:
            log.warning("class %r has one member; SMOTE falls back to duplication", ds.class_names[c])
            new_X.append(np.repeat(ds.X[members], need, axis=0))
            new_y.append(np.full(need, c))
            pairs.extend((members[0], members[0], 0.0) for _ in range(need))
            continue
        kk = min(k, members.size - 1)
        nn = _neighbors(ds.X[members], kk)
        src = np.arange(need) % members.size  # round-robin over the class
        pick = nn[src, rng.integers(0, kk, size=need)]
        lam = rng.uniform(0.0, 1.0, size=need)
        a, b = ds.X[members[src]], ds.X[members[pick]]
        new_X.append(a + lam[:, None] * (b - a))
        new_y.append(np.full(need, c))
        pairs.extend(zip(members[src], members[pick], lam))
    if not new_X:
        return ds, np.zeros((0, 3))
    out = Dataset(
        np.vstack([ds.X] + new_X), np.concatenate([ds.y] + new_y), ds.class_names
    )
    return out, np.array(pairs, dtype=np.float64)


def smote(ds: Dataset, k: int = 5, seed=0) -> Dataset:
    """Interpolate new rows between each minority sample and one of its k nearest
    same-class neighbours until every class reaches the majority count."""
    return smote_with_pairs(ds, k, seed)[0]


def resample(ds: Dataset, cfg: SamplerConfig) -> Dataset:
    kind = cfg.kind.lower()
    if kind == "none":
        return ds
    if kind == "ros":
        return ros(ds, cfg.seed)
    if kind == "rus":
        return rus(ds, cfg.seed)
    return smote(ds, cfg.k_neighbors, cfg.seed)


def knn_proba(train: Dataset, X, k: int = 5) -> np.ndarray:
    """Fraction of the ``k`` Euclidean nearest training rows voting for each class."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not 1 <= k <= train.n:
        raise ValueError(f"k must lie in 1..{train.n}, got {k}")
    d2 = ((X[:, None, :] - train.X[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = np.zeros((X.shape[0], train.n_classes))
    for c in range(train.n_classes):
        votes[:, c] = (train.y[nearest] == c).sum(axis=1)
    return votes / k


def knn_predict(train: Dataset, X, k: int = 5):
    """Majority-vote labels (ties to the lowest class) and the vote fractions."""
    proba = knn_proba(train, X, k)
    return np.argmax(proba, axis=1).astype(np.int64), proba
