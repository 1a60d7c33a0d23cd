"""Dataset ingestion, label encoding, task derivation and fold generation."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

REGRESSION = "regression"
CLASSIFICATION = "classification"
TASKS = (REGRESSION, CLASSIFICATION)


class DataError(Exception):
    """Base class for every problem with input data."""


class MissingFileError(DataError):
    pass


class MissingColumnError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabelMatrix:
    """Training labels, one row per example.

    Regression labels are an ``n x 1`` matrix. Classification labels are one-hot
    encoded (``n x k``) with ``class_names`` giving the column order.
    """

    kind: str
    values: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        if self.kind not in TASKS:
            raise ValueError(f"unknown label kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("label values must be a matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("label values must be finite")
        if self.kind == REGRESSION:
            if values.shape[1] != 1:
                raise ValueError("regression labels must have exactly one column")
        else:
            if len(self.class_names) != values.shape[1]:
                raise ValueError("class_names must match the number of label columns")
            if not (np.isin(values, (0.0, 1.0)).all() and np.all(values.sum(axis=1) == 1.0)):
                raise ValueError("classification labels must be one-hot rows")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @classmethod
    def regression(cls, targets) -> "LabelMatrix":
        return cls(REGRESSION, np.asarray(targets, dtype=float).reshape(-1, 1))

    @classmethod
    def one_hot(cls, class_index, class_names) -> "LabelMatrix":
        class_index = np.asarray(class_index, dtype=int)
        values = np.zeros((len(class_index), len(class_names)))
        values[np.arange(len(class_index)), class_index] = 1.0
        return cls(CLASSIFICATION, values, tuple(class_names))

    def class_index(self) -> np.ndarray:
        """Column index of the hot entry in each row (classification only)."""
        if self.kind != CLASSIFICATION:
            raise ValueError("class_index is only defined for classification labels")
        return np.argmax(self.values, axis=1)

    def take(self, rows) -> "LabelMatrix":
        return LabelMatrix(self.kind, self.values[np.asarray(rows, dtype=int)], self.class_names)

    def __eq__(self, other):
        if not isinstance(other, LabelMatrix):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.class_names == other.class_names
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: LabelMatrix
    feature_names: Optional[tuple] = None
    example_ids: tuple = field(default=None)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n, d = features.shape
        if n < 1:
            raise EmptyDatasetError("dataset has no rows")
        if d < 1:
            raise ValueError("dataset needs at least one feature")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if self.labels.n != n:
            raise ValueError(f"label rows ({self.labels.n}) != feature rows ({n})")
        if self.feature_names is not None:
            if len(self.feature_names) != d:
                raise ValueError("feature_names length does not match feature count")
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        ids = tuple(range(n)) if self.example_ids is None else tuple(self.example_ids)
        if len(ids) != n:
            raise ValueError("example_ids length does not match row count")
        object.__setattr__(self, "example_ids", ids)
        object.__setattr__(self, "features", _frozen(features))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def task(self) -> str:
        return self.labels.kind

    def take(self, rows) -> "Dataset":
        """Row subset; example ids travel with their rows."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            self.features[rows],
            self.labels.take(rows),
            self.feature_names,
            tuple(self.example_ids[i] for i in rows),
        )

    def with_labels(self, labels: LabelMatrix) -> "Dataset":
        return Dataset(self.features, labels, self.feature_names, self.example_ids)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and self.labels == other.labels
            and self.feature_names == other.feature_names
            and self.example_ids == other.example_ids
        )

    __hash__ = None


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise NonNumericCellError(
            f"non-numeric cell {cell!r} at data row {row}, column {column!r}"
        ) from None
    if not math.isfinite(value):
        raise NonNumericCellError(f"non-numeric cell {cell!r} at data row {row}, column {column!r}")
    return value


def load_csv(path, target_column: str, task: str = REGRESSION) -> Dataset:
    """Read a numeric CSV file with a header row.

    Every column except ``target_column`` becomes a feature, in file order.
    Classification targets are kept as strings and one-hot encoded with the
    classes sorted lexicographically.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError(f"{path} is empty")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise MissingColumnError(f"target column {target_column!r} not in header {header}")
        target_pos = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != target_pos]
        rows, targets = [], []
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"data row {lineno} has {len(record)} cells, header has {len(header)}"
                )
            feats = []
            for i, cell in enumerate(record):
                if i == target_pos:
                    continue
                feats.append(_parse_float(cell.strip(), lineno, header[i]))
            rows.append(feats)
            raw = record[target_pos].strip()
            targets.append(_parse_float(raw, lineno, target_column) if task == REGRESSION else raw)
    if not rows:
        raise EmptyDatasetError(f"{path} has a header but no data rows")
    if not feature_names:
        raise DataError(f"{path} has no feature columns")
    if task == REGRESSION:
        labels = LabelMatrix.regression(targets)
    else:
        if any(t == "" for t in targets):
            raise NonNumericCellError("empty class label")
        classes = sorted(set(targets))
        lookup = {c: i for i, c in enumerate(classes)}
        labels = LabelMatrix.one_hot([lookup[t] for t in targets], classes)
    return Dataset(np.array(rows, dtype=float), labels, tuple(feature_names))


def export_csv(dataset: Dataset, path, target_column: str = "target") -> None:
    """Write ``dataset`` in the format read by :func:`load_csv`.

    Floats are written with ``repr`` so a reload reproduces them exactly.
    """
    names = dataset.feature_names or tuple(f"f{j}" for j in range(dataset.d))
    if target_column in names:
        raise ValueError(f"target column name {target_column!r} clashes with a feature name")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [target_column])
        if dataset.task == CLASSIFICATION:
            targets = [dataset.labels.class_names[i] for i in dataset.labels.class_index()]
        else:
            targets = [repr(float(v)) for v in dataset.labels.values[:, 0]]
        for row, target in zip(dataset.features, targets):
            writer.writerow([repr(float(v)) for v in row] + [target])


def _finite_targets(targets) -> np.ndarray:
    targets = np.asarray(targets, dtype=float).ravel()
    if targets.size < 1:
        raise ValueError("need at least one target value")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    return targets


def binarize_by_mean(targets) -> LabelMatrix:
    """Class 1 ("at-or-above") iff the target is >= the mean of all targets."""
    targets = _finite_targets(targets)
    cls = (targets >= targets.mean()).astype(int)
    return LabelMatrix.one_hot(cls, ("below", "at-or-above"))


def equal_width_bin(targets, bins: int = 10) -> LabelMatrix:
    """One-hot bin membership over ``bins`` equal-width intervals of [min, max].

    Intervals are half-open except the last, which also holds the maximum.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    targets = _finite_targets(targets)
    lo, hi = targets.min(), targets.max()
    if lo == hi:
        raise ValueError("degenerate target range")
    width = (hi - lo) / bins
    cls = np.floor((targets - lo) / width).astype(int)
    cls = np.clip(cls, 0, bins - 1)
    return LabelMatrix.one_hot(cls, tuple(f"bin{i}" for i in range(bins)))


@dataclass(frozen=True)
class FoldPlan:
    n: int
    folds: tuple
    seed: int

    def train_test(self, i: int):
        """Training and test indices for fold ``i`` (both sorted)."""
        test = self.folds[i]
        train = np.concatenate([f for j, f in enumerate(self.folds) if j != i])
        return np.sort(train), np.sort(test)

    def __len__(self):
        return len(self.folds)


def kfold_split(n: int, f: int, seed: int = 0) -> FoldPlan:
    if f < 2:
        raise ValueError("need at least two folds")
    if f > n:
        raise ValueError(f"cannot split {n} examples into {f} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = tuple(np.sort(part) for part in np.array_split(perm, f))
    for part in folds:
        part.setflags(write=False)
    return FoldPlan(n, folds, seed)


def nested_subsample(train_indices: Sequence[int], sizes: Sequence[int], seed: int = 0) -> list:
    """Subsamples of ``train_indices``, one per size, each containing all smaller ones.

    A single seeded shuffle is truncated to each size.
    """
    train_indices = np.asarray(train_indices, dtype=int)
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("subsample sizes must be positive")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("subsample sizes must be strictly ascending")
    if sizes and sizes[-1] > len(train_indices):
        raise ValueError(
            f"subsample size {sizes[-1]} exceeds the {len(train_indices)} available training indices"
        )
    order = np.random.default_rng(seed).permutation(train_indices)
    return [order[:s].copy() for s in sizes]


def read_features(path, feature_names: Sequence[str]) -> np.ndarray:
    """Read the named numeric columns of a CSV file, in the given order.

    Extra columns (a target, say) are ignored.
    """
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError(f"{path} is empty")
        header = [h.strip() for h in header]
        missing = [name for name in feature_names if name not in header]
        if missing:
            raise MissingColumnError(f"columns {missing} not in header of {path}")
        cols = [header.index(name) for name in feature_names]
        rows = []
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(f"data row {lineno} has {len(record)} cells, header has {len(header)}")
            rows.append([_parse_float(record[c].strip(), lineno, header[c]) for c in cols])
    if not rows:
        raise EmptyDatasetError(f"{path} has a header but no data rows")
    return np.array(rows, dtype=float)
