"""Cross-validated sweeps measuring how many training examples back each prediction.

A sweep varies one knob (training-set size, feature count, tree count, minimum
leaf size, ``k`` for top-k prediction, or ``c`` for cumulative-weight
prediction) while folds and seeds stay fixed. For every sweep value the report
holds the fold means of the effective example count ``N``, the selected
cumulative weight ``W`` and the task metrics.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import datasets
from .data import (
    REGRESSION,
    DataError,
    Dataset,
    binarize_by_mean,
    equal_width_bin,
    kfold_split,
    load_csv,
    nested_subsample,
)
from .explain import predict_cumulative, predict_top_k
from .forest import HyperParams, fit
from .metrics import evaluate
from .weights import effective_count, forest_weights_many, predict_from_weights

REPORT_SCHEMA_VERSION = 1

# config key -> column name used in the CSV table
SWEEP_AXES = {
    "train_sizes": "examples",
    "feature_counts": "features",
    "tree_counts": "trees",
    "min_leaf_sizes": "min_leaf",
    "top_k": "k",
    "cumulative_c": "c",
}
DERIVATIONS = ("none", "binarize_by_mean", "equal_width_bin")


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """What to run.

    ``dataset`` is either ``{"path": ..., "target": ..., "task": ...}`` or
    ``{"builtin": "synthetic" | "digits", ...generator options}``.
    """

    dataset: dict
    sweep_axis: str
    sweep_values: tuple
    derivation: str = "none"
    bins: int = 10
    folds: int = 10
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}; expected one of {list(SWEEP_AXES)}")
        values = tuple(self.sweep_values)
        if not values:
            raise ConfigError("sweep needs at least one value")
        if any(not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0 for v in values):
            raise ConfigError("sweep values must be positive numbers")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("sweep values must be strictly ascending")
        if self.sweep_axis == "cumulative_c":
            if values[-1] > 1.0:
                raise ConfigError("cumulative weights must lie in (0, 1]")
            values = tuple(float(v) for v in values)
        else:
            if any(float(v) != int(v) for v in values):
                raise ConfigError(f"{self.sweep_axis} values must be integers")
            values = tuple(int(v) for v in values)
        object.__setattr__(self, "sweep_values", values)
        if self.derivation not in DERIVATIONS:
            raise ConfigError(f"derivation must be one of {DERIVATIONS}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not isinstance(self.dataset, dict) or not ("path" in self.dataset or "builtin" in self.dataset):
            raise ConfigError("dataset must name a 'path' or a 'builtin'")
        unknown = set(self.params) - {"n_trees", "min_samples_leaf", "max_features"}
        if unknown:
            raise ConfigError(f"unknown forest parameters {sorted(unknown)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        sweep = doc.pop("sweep", None)
        if not isinstance(sweep, dict) or len(sweep) != 1:
            raise ConfigError("'sweep' must set exactly one axis")
        ((axis, values),) = sweep.items()
        if not isinstance(values, list):
            raise ConfigError("sweep values must be a list")
        allowed = {"dataset", "derivation", "bins", "folds", "seed", "params"}
        extra = set(doc) - allowed
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "dataset" not in doc:
            raise ConfigError("config needs a 'dataset'")
        return cls(sweep_axis=axis, sweep_values=tuple(values), **doc)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "derivation": self.derivation,
            "bins": self.bins,
            "folds": self.folds,
            "seed": self.seed,
            "params": self.params,
            "sweep": {self.sweep_axis: list(self.sweep_values)},
        }

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(**{**self.__dict__, "seed": seed})

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"no such config file: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    task: str
    rows: list  # one dict per sweep value: value, N, W, metrics, folds

    @property
    def metric_names(self) -> tuple:
        return ("RMSE", "Corr") if self.task == REGRESSION else ("Acc", "AUC")

    @property
    def columns(self) -> list:
        return [SWEEP_AXES[self.config.sweep_axis], "N", "W", *self.metric_names]

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "task": self.task,
            "columns": self.columns,
            "rows": _json_safe(self.rows),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            cells = [_format_axis(row["value"])]
            cells += [_round3(row[name]) for name in ("N", "W", *self.metric_names)]
            writer.writerow(cells)
        return buf.getvalue()

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        with open(os.path.join(out_dir, "table.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _json_safe(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _round3(v) -> str:
    return "nan" if v is None or math.isnan(v) else f"{v:.3f}"


def _format_axis(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def feature_truncate(dataset: Dataset, n_features: int) -> Dataset:
    """Keep the first ``n_features`` feature columns."""
    if not 1 <= n_features <= dataset.d:
        raise ValueError(f"cannot keep {n_features} of {dataset.d} features")
    names = None if dataset.feature_names is None else dataset.feature_names[:n_features]
    return Dataset(dataset.features[:, :n_features], dataset.labels, names, dataset.example_ids)


def load_dataset(config: ExperimentConfig) -> Dataset:
    """Load the configured dataset and apply the label derivation.

    Derived labels use statistics of the whole dataset, so they are the same in
    every fold.
    """
    spec = dict(config.dataset)
    if "builtin" in spec:
        name = spec.pop("builtin")
        ds = datasets.load_builtin(name, **spec)
    else:
        ds = load_csv(spec["path"], spec.get("target", "target"), spec.get("task", REGRESSION))
    if config.derivation == "none":
        return ds
    if ds.task != REGRESSION:
        raise ConfigError(f"derivation {config.derivation!r} needs regression targets")
    targets = ds.labels.values[:, 0]
    if config.derivation == "binarize_by_mean":
        return ds.with_labels(binarize_by_mean(targets))
    return ds.with_labels(equal_width_bin(targets, config.bins))


def evaluate_forest(forest, test: Dataset, rule: Optional[str] = None, parameter=None) -> dict:
    """Metrics, mean N and mean W of ``forest`` on ``test``.

    ``rule`` is ``None`` (all weights), ``"top_k"`` or ``"cumulative"``.
    """
    weights = forest_weights_many(forest, test.features)
    labels = forest.labels
    preds, counts, achieved = [], [], []
    for w in weights:
        if rule is None:
            preds.append(predict_from_weights(w, labels))
            counts.append(effective_count(w))
            achieved.append(1.0)
            continue
        if rule == "top_k":
            pred, expl = predict_top_k(w, labels, parameter)
        else:
            pred, expl = predict_cumulative(w, labels, parameter)
        preds.append(pred)
        counts.append(len(expl))
        achieved.append(expl.achieved_weight)
    report = evaluate(test.task, np.array(preds), test.labels.values)
    out = {"N": float(np.mean(counts)), "W": float(np.mean(achieved))}
    if test.task == REGRESSION:
        out.update(RMSE=report.rmse, Corr=report.corr)
    else:
        out.update(Acc=report.acc, AUC=report.auc)
    return out


def _fold_cells(config, ds, params, fold, train, test) -> list:
    """Results for every sweep value on one fold, in sweep order."""
    axis, values = config.sweep_axis, config.sweep_values
    test_ds = ds.take(test)
    if axis == "train_sizes":
        subsets = nested_subsample(train, values, seed=config.seed + fold)
        return [evaluate_forest(fit(ds.take(s), params), test_ds) for s in subsets]
    if axis == "feature_counts":
        cells = []
        for v in values:
            train_v = feature_truncate(ds.take(train), v)
            cells.append(evaluate_forest(fit(train_v, params), feature_truncate(test_ds, v)))
        return cells
    if axis == "min_leaf_sizes":
        return [
            evaluate_forest(fit(ds.take(train), params.replace(min_samples_leaf=v)), test_ds)
            for v in values
        ]
    if axis == "tree_counts":
        full = fit(ds.take(train), params.replace(n_trees=values[-1]))
        return [evaluate_forest(full.truncated(v), test_ds) for v in values]
    forest = fit(ds.take(train), params)
    rule = "top_k" if axis == "top_k" else "cumulative"
    return [evaluate_forest(forest, test_ds, rule, v) for v in values]


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> ExperimentReport:
    """Run every (sweep value, fold) cell and average each value over folds."""
    ds = load_dataset(config) if dataset is None else dataset
    params = HyperParams(task=ds.task, seed=config.seed, **config.params)
    plan = kfold_split(ds.n, config.folds, config.seed)
    per_fold = []
    for i in range(len(plan)):
        train, test = plan.train_test(i)
        try:
            per_fold.append(_fold_cells(config, ds, params, i, train, test))
        except DataError:
            raise
        except (ValueError, ArithmeticError) as e:
            raise ExperimentError(f"{config.sweep_axis} sweep, fold {i}: {e}") from e
    rows = []
    for j, value in enumerate(config.sweep_values):
        folds = [cells[j] for cells in per_fold]
        row = {"value": value}
        for key in folds[0]:
            vals = np.array([f[key] for f in folds], dtype=float)
            row[key] = float(np.nanmean(vals)) if not np.all(np.isnan(vals)) else float("nan")
        row["folds"] = folds
        rows.append(row)
    return ExperimentReport(config, ds.task, rows)
