"""Confusion-matrix and ranking metrics for imbalanced classification."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import EmptyDatasetError

log = logging.getLogger(__name__)


def confusion(y_true, y_pred, C: int) -> np.ndarray:
    """C x C counts; entry ``[t, p]`` counts true class t predicted as p."""
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"{y_true.size} true labels but {y_pred.size} predictions")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= C):
            raise ValueError(f"{name} has labels outside 0..{C - 1}")
    cm = np.zeros((C, C), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def accuracy(cm) -> float:
    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        raise EmptyDatasetError("accuracy of an empty evaluation")
    return float(np.trace(cm) / total)


def _ratio(num, den):
    return float(num / den) if den > 0 else 0.0


def precision_recall_f(cm, positive_class: int):
    """Precision, recall and F-score of one class; 0/0 evaluates to 0."""
    cm = np.asarray(cm)
    if not 0 <= positive_class < cm.shape[0]:
        raise ValueError(f"class index {positive_class} out of range")
    tp = cm[positive_class, positive_class]
    p = _ratio(tp, cm[:, positive_class].sum())
    r = _ratio(tp, cm[positive_class, :].sum())
    f = _ratio(2 * p * r, p + r)
    return p, r, f


def gmean(cm) -> float:
    """Geometric mean of the per-class recalls (sqrt(TPR * TNR) for two classes)."""
    cm = np.asarray(cm)
    recalls = [precision_recall_f(cm, c)[1] for c in range(cm.shape[0])]
    if min(recalls) == 0.0:
        return 0.0
    return float(np.exp(np.mean(np.log(recalls))))


def auc_binary(scores, labels) -> float:
    """Mann-Whitney AUC: P(s+ > s-) + P(s+ == s-)/2 over positive/negative pairs.

    ``labels`` are truthy for positives.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    pos = np.asarray(labels).reshape(-1).astype(bool)
    if scores.shape != pos.shape:
        raise ValueError(f"{scores.size} scores but {pos.size} labels")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined unless both classes are present")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _pair_auc(proba, labels, j, k):
    sel = (labels == j) | (labels == k)
    return auc_binary(proba[sel, j], labels[sel] == j)


def mauc(proba, labels) -> float:
    """One-vs-one multi-class AUC averaged over unordered class pairs.

    Pairs involving a class absent from ``labels`` are skipped and the
    average is taken over the remaining pairs.
    """
    proba = np.asarray(proba, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    C = proba.shape[1]
    present = set(np.unique(labels).tolist())
    if len(present) < 2:
        raise ValueError("MAUC needs at least two classes present")
    total, pairs, skipped = 0.0, 0, 0
    for j in range(C):
        for k in range(j + 1, C):
            if j not in present or k not in present:
                skipped += 1
                continue
            total += _pair_auc(proba, labels, j, k) + _pair_auc(proba, labels, k, j)
            pairs += 1
    if skipped:
        log.warning("MAUC: skipped %d class pairs with an absent class", skipped)
    return total / (2.0 * pairs)


def mauc_ovr(proba, labels) -> float:
    """Unweighted mean of one-vs-rest AUCs over the classes present."""
    proba = np.asarray(proba, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    present = np.unique(labels)
    if present.size < 2:
        raise ValueError("one-vs-rest AUC needs at least two classes present")
    return float(np.mean([auc_binary(proba[:, c], labels == c) for c in present]))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f: float
    macro_gmean: float
    auc_or_mauc: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f: tuple[float, ...]
    confusion: tuple[tuple[int, ...], ...]
    auc_kind: str = "auc"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precision"] = list(self.precision)
        d["recall"] = list(self.recall)
        d["f"] = list(self.f)
        d["confusion"] = [list(r) for r in self.confusion]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            accuracy=d["accuracy"], macro_f=d["macro_f"], macro_gmean=d["macro_gmean"],
            auc_or_mauc=d["auc_or_mauc"], precision=tuple(d["precision"]),
            recall=tuple(d["recall"]), f=tuple(d["f"]),
            confusion=tuple(tuple(r) for r in d["confusion"]),
            auc_kind=d.get("auc_kind", "auc"),
        )


def report(proba, labels, positive_class=None, multiclass_auc="ovo") -> MetricsReport:
    """All metrics for predicted class probabilities ``proba`` (n x C).

    Two-class problems report the binary AUC of the ``positive_class``
    column (default: the minority class of ``labels``); otherwise MAUC,
    one-vs-one by default or one-vs-rest with ``multiclass_auc="ovr"``.
    """
    proba = np.asarray(proba, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    C = proba.shape[1]
    pred = np.argmax(proba, axis=1) if proba.shape[0] else np.zeros(0, dtype=np.int64)
    cm = confusion(labels, pred, C)
    prf = [precision_recall_f(cm, c) for c in range(C)]
    if C == 2:
        if positive_class is None:
            counts = np.bincount(labels, minlength=2)
            positive_class = int(np.argmin(counts))
        auc = auc_binary(proba[:, positive_class], labels == positive_class)
        kind = "auc"
    elif multiclass_auc == "ovr":
        auc, kind = mauc_ovr(proba, labels), "mauc_ovr"
    else:
        auc, kind = mauc(proba, labels), "mauc"
    return MetricsReport(
        accuracy=accuracy(cm),
        macro_f=float(np.mean([t[2] for t in prf])),
        macro_gmean=gmean(cm),
        auc_or_mauc=auc,
        precision=tuple(t[0] for t in prf),
        recall=tuple(t[1] for t in prf),
        f=tuple(t[2] for t in prf),
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
        auc_kind=kind,
    )
