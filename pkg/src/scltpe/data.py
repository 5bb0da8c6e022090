"""Tabular dataset loading, normalization, splitting and batch augmentation."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, EmptyDatasetError, ParseError

log = logging.getLogger(__name__)

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"X must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise DimensionError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        C = len(self.class_names)
        if y.size and (y.min() < 0 or y.max() >= C):
            raise ValueError(f"labels must lie in 0..{C - 1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.class_names)

    def with_features(self, X) -> "Dataset":
        return Dataset(X, self.y, self.class_names)

    def minority_class(self) -> int:
        """Index of the smallest class (lowest index on ties)."""
        return int(np.argmin(self.class_counts))


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class AugmentedBatch:
    X: np.ndarray       # 2B x d, rows 2k and 2k+1 are views of source k
    y: np.ndarray       # 2B labels
    source: np.ndarray  # 2B indices into 0..B-1

    @property
    def pair_map(self) -> np.ndarray:
        """Index of the other view of the same source, j(i)."""
        return np.arange(self.X.shape[0]) ^ 1


def _check_nonempty(rows, path):
    if not rows:
        raise EmptyDatasetError(f"{path}: dataset has no rows")


def _encode_labels(tokens, class_names=None, path=None):
    """Map class tokens to ints: by first appearance, or by a fixed encoding."""
    fixed = class_names is not None
    names = list(class_names) if fixed else []
    lookup = {n: i for i, n in enumerate(names)}
    y = []
    for tok in tokens:
        if tok not in lookup:
            if fixed:
                raise ParseError(f"class {tok!r} not in the expected encoding {names}", path)
            lookup[tok] = len(names)
            names.append(tok)
        y.append(lookup[tok])
    return np.asarray(y, dtype=np.int64), tuple(names)


def _warn_single_class(ds, path):
    if ds.n_classes == 1:
        log.warning("%s: only one class present", path)


_ATTR_RE = re.compile(r"@attribute\s+('[^']*'|\"[^\"]*\"|\S+)\s+(.*)$", re.IGNORECASE)


def load_keel(path, class_names=None) -> Dataset:
    """Parse a KEEL ``.dat`` file.

    Real and integer attributes become features; the last attribute must be
    nominal (``{a, b, ...}``) and is the class. Class labels are numbered in
    order of first appearance in the data section unless ``class_names``
    fixes the encoding.
    """
    path = Path(path)
    attrs = []  # (name, kind, nominal values or None)
    rows = []
    tokens = []
    in_data = False
    saw_relation = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if not in_data:
                low = line.lower()
                if low.startswith("@relation"):
                    saw_relation = True
                elif low.startswith("@attribute"):
                    m = _ATTR_RE.match(line)
                    if m is None:
                        raise ParseError(f"bad attribute line {line!r}", path, lineno)
                    name, rest = m.group(1).strip("'\""), m.group(2).strip()
                    if rest.startswith("{"):
                        if not rest.endswith("}"):
                            raise ParseError("unterminated nominal value list", path, lineno)
                        values = [v.strip() for v in rest[1:-1].split(",") if v.strip()]
                        attrs.append((name, "nominal", values))
                    else:
                        kind = rest.split()[0].lower() if rest else ""
                        if kind not in ("real", "integer", "numeric"):
                            raise ParseError(f"unsupported attribute type {kind!r}", path, lineno)
                        attrs.append((name, "numeric", None))
                elif low.startswith(("@inputs", "@input", "@outputs", "@output")):
                    continue
                elif low.startswith("@data"):
                    if not saw_relation or not attrs:
                        raise ParseError("@data before @relation/@attribute header", path, lineno)
                    if attrs[-1][1] != "nominal":
                        raise ParseError("last attribute must be a nominal class", path, lineno)
                    if any(kind == "nominal" for _, kind, _ in attrs[:-1]):
                        raise ParseError("nominal input attributes are not supported", path, lineno)
                    in_data = True
                else:
                    raise ParseError(f"unexpected header line {line!r}", path, lineno)
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != len(attrs):
                raise ParseError(
                    f"expected {len(attrs)} values, got {len(cells)}", path, lineno
                )
            try:
                row = [float(c) for c in cells[:-1]]
            except ValueError:
                raise ParseError(f"non-numeric feature in {line!r}", path, lineno) from None
            if not all(math.isfinite(v) for v in row):
                raise ParseError("non-finite feature value", path, lineno)
            if cells[-1] not in attrs[-1][2]:
                raise ParseError(f"unknown class token {cells[-1]!r}", path, lineno)
            rows.append(row)
            tokens.append(cells[-1])
    if not in_data:
        raise ParseError("missing @data section", path)
    _check_nonempty(rows, path)
    y, names = _encode_labels(tokens, class_names, path)
    ds = Dataset(np.asarray(rows, dtype=np.float64), y, names)
    _warn_single_class(ds, path)
    return ds


def load_csv(path, label_column=-1, class_names=None) -> Dataset:
    """Read a CSV with a header row; ``label_column`` is an index or a name."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header row", path, 1) from None
        ncol = len(header)
        if isinstance(label_column, str):
            if label_column not in header:
                raise ParseError(f"no column named {label_column!r}", path, 1)
            li = header.index(label_column)
        else:
            li = label_column % ncol
        rows, tokens = [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != ncol:
                raise ParseError(f"expected {ncol} cells, got {len(cells)}", path, lineno)
            row = []
            for j, c in enumerate(cells):
                if j == li:
                    continue
                c = c.strip()
                if c == "" or c.lower() in ("?", "na", "nan"):
                    raise ParseError(f"missing value in column {header[j]!r}", path, lineno)
                try:
                    v = float(c)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {c!r} in column {header[j]!r}", path, lineno
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(f"non-finite value in column {header[j]!r}", path, lineno)
                row.append(v)
            label = cells[li].strip()
            if label == "":
                raise ParseError(f"missing value in column {header[li]!r}", path, lineno)
            rows.append(row)
            tokens.append(label)
    _check_nonempty(rows, path)
    y, names = _encode_labels(tokens, class_names, path)
    ds = Dataset(np.asarray(rows, dtype=np.float64), y, names)
    _warn_single_class(ds, path)
    return ds


def write_csv(ds: Dataset, path, feature_names=None, label_name="class"):
    """Write ``ds`` as CSV; floats use ``repr`` so a reload is bit-identical."""
    names = list(feature_names) if feature_names else [f"x{j}" for j in range(ds.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + [label_name])
        for row, label in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + [ds.class_names[label]])


def load_dataset(path, fmt=None, class_names=None) -> Dataset:
    path = Path(path)
    fmt = fmt or ("keel" if path.suffix.lower() == ".dat" else "csv")
    if fmt == "keel":
        return load_keel(path, class_names)
    if fmt == "csv":
        return load_csv(path, class_names=class_names)
    raise ValueError(f"unknown dataset format {fmt!r}")


def bundled_path(name: str) -> Path:
    """Path of a dataset file shipped with the package (e.g. ``glass0``)."""
    p = Path(__file__).parent / "datasets" / f"{name}.dat"
    if not p.exists():
        raise FileNotFoundError(f"no bundled dataset {name!r}")
    return p


def resolve_path(name_or_path) -> Path:
    """An existing file path as given, else the bundled dataset of that name."""
    p = Path(name_or_path)
    if p.exists():
        return p
    return bundled_path(str(name_or_path))


# --------------------------------------------------------------------------
# normalization and splitting


def zscore_fit(train: Dataset) -> NormalizationStats:
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    return NormalizationStats(mean, np.maximum(std, STD_FLOOR))


def zscore_apply(stats: NormalizationStats, ds: Dataset) -> Dataset:
    if ds.d != stats.mean.shape[0]:
        raise DimensionError(f"dataset has {ds.d} features, stats have {stats.mean.shape[0]}")
    return ds.with_features((ds.X - stats.mean) / stats.std)


def stratified_split(ds: Dataset, test_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Per-class split: ``round(count * fraction)`` members of each class go to test.

    Classes with two or more members always keep at least one test sample
    (and one training sample); a singleton class stays in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y == c)
        count = members.size
        if count == 0:
            continue
        if count == 1:
            log.warning("class %r has one member; keeping it in train", ds.class_names[c])
            train_idx.append(members)
            continue
        n_test = min(max(int(math.floor(count * test_fraction + 0.5)), 1), count - 1)
        perm = rng.permutation(members)
        test_idx.append(np.sort(perm[:n_test]))
        train_idx.append(np.sort(perm[n_test:]))
    tr = np.sort(np.concatenate(train_idx)) if train_idx else np.array([], dtype=np.int64)
    te = np.sort(np.concatenate(test_idx)) if test_idx else np.array([], dtype=np.int64)
    return ds.subset(tr), ds.subset(te)


# --------------------------------------------------------------------------
# batches


def sample_batch(ds: Dataset, B: int, rng: np.random.Generator) -> np.ndarray:
    """``B`` row indices drawn uniformly with replacement."""
    if B < 2:
        raise ValueError(f"batch size must be >= 2, got {B}")
    if ds.n == 0:
        raise EmptyDatasetError("cannot sample from an empty dataset")
    return rng.integers(0, ds.n, size=B)


def augment_two_views(ds: Dataset, indices, sigma: float, rng: np.random.Generator) -> AugmentedBatch:
    """Emit every selected row twice with independent N(0, sigma^2) feature noise."""
    indices = np.asarray(indices, dtype=np.int64)
    B = indices.size
    base = np.repeat(ds.X[indices], 2, axis=0)
    noise = rng.normal(0.0, 1.0, size=base.shape) * sigma if sigma > 0 else 0.0
    return AugmentedBatch(
        X=base + noise,
        y=np.repeat(ds.y[indices], 2),
        source=np.repeat(np.arange(B), 2),
    )
