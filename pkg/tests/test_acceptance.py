"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, including measured runtime against the criterion's budget.
"""

import json
import math
import time

import numpy as np
import pytest

from exforest import HyperParams, fit, predict_standard
from exforest.data import binarize_by_mean, equal_width_bin, kfold_split
from exforest.datasets import make_synthetic_regression
from exforest.explain import predict_cumulative, predict_top_k
from exforest.forest import Forest, predict_standard_many
from exforest.harness import ExperimentConfig, load_dataset, run_experiment
from exforest.metrics import binary_auc, pearson_corr, rmse
from exforest.weights import forest_weights_many, predict_from_weights

from test_metrics import pair_count_auc

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    assert ok, RESULTS[number]


@pytest.fixture(scope="module")
def three_forests():
    """Regression, binary and multiclass forests (n=500, d=20, 100 trees) plus 200 test rows each."""
    start = time.perf_counter()
    ds = make_synthetic_regression(n=700, d=20, seed=2024)
    train, test = np.arange(500), np.arange(500, 700)
    targets = ds.labels.values[:, 0]
    variants = {
        "regression": ds,
        "binary": ds.with_labels(binarize_by_mean(targets)),
        "multiclass": ds.with_labels(equal_width_bin(targets, 10)),
    }
    out = {}
    for name, data in variants.items():
        params = HyperParams(n_trees=100, seed=17, task=data.task)
        out[name] = (fit(data.take(train), params), data.features[test])
    return out, time.perf_counter() - start


def test_1_exact_fidelity(three_forests):
    forests, fit_seconds = three_forests
    start = time.perf_counter()
    worst = 0.0
    for forest, X in forests.values():
        standard = predict_standard_many(forest, X)
        via_weights = np.array([predict_from_weights(w, forest.labels) for w in forest_weights_many(forest, X)])
        assert standard.shape == via_weights.shape == (200, forest.m)
        worst = max(worst, float(np.abs(standard - via_weights).max()))
    seconds = fit_seconds + time.perf_counter() - start
    record(1, worst <= 1e-9 and seconds < 60, f"max |Eq1 - Eq2| = {worst:.2e} (tol 1e-9), {seconds:.1f}s (< 60s)")


def test_2_reduction_identities(three_forests):
    forests, _ = three_forests
    start = time.perf_counter()
    worst = 0.0
    for forest, X in forests.values():
        for x, w in zip(X, forest_weights_many(forest, X)):
            standard = predict_standard(forest, x)
            top, _ = predict_top_k(w, forest.labels, forest.n_train)
            cum, _ = predict_cumulative(w, forest.labels, 1.0)
            worst = max(worst, float(np.abs(top - standard).max()), float(np.abs(cum - standard).max()))

    # the c = 1.0 experiment row against an independent fold-by-fold evaluation
    cfg = ExperimentConfig.from_dict(
        {
            "dataset": {"builtin": "synthetic", "n": 400, "d": 10, "seed": 5},
            "folds": 5,
            "seed": 3,
            "params": {"n_trees": 30},
            "sweep": {"cumulative_c": [0.5, 1.0]},
        }
    )
    row = run_experiment(cfg).rows[-1]
    ds = load_dataset(cfg)
    plan = kfold_split(ds.n, cfg.folds, cfg.seed)
    per_fold = {"RMSE": [], "Corr": [], "N": []}
    for i in range(cfg.folds):
        train, test = plan.train_test(i)
        forest = fit(ds.take(train), HyperParams(n_trees=30, seed=cfg.seed))
        ws = forest_weights_many(forest, ds.features[test])
        pred = np.array([predict_from_weights(w, forest.labels)[0] for w in ws])
        actual = ds.labels.values[test, 0]
        per_fold["RMSE"].append(rmse(pred, actual))
        per_fold["Corr"].append(pearson_corr(pred, actual))
        per_fold["N"].append(float(np.mean([len(w) for w in ws])))
    exact = all(row[k] == float(np.mean(v)) for k, v in per_fold.items()) and row["W"] == 1.0
    seconds = time.perf_counter() - start
    record(
        2,
        worst <= 1e-9 and exact and seconds < 60,
        f"max |reduced - standard| = {worst:.2e} (tol 1e-9), c=1.0 row exact={exact}, {seconds:.1f}s (< 60s)",
    )


def test_3_normalization(three_forests):
    forests, _ = three_forests
    rng = np.random.default_rng(7)
    pairs = 0
    bad = []
    per_forest = math.ceil(1000 / len(forests))
    for name, (forest, _) in forests.items():
        X = rng.uniform(-1.5, 1.5, size=(per_forest, 20))
        for x, w in zip(X, forest_weights_many(forest, X)):
            pairs += 1
            if abs(w.values.sum() - 1.0) > 1e-9:
                bad.append(("weights", name))
            preds = [predict_from_weights(w, forest.labels)]
            k = int(rng.integers(1, 60))
            c = float(rng.uniform(0.01, 1.0))
            for pred, expl in (predict_top_k(w, forest.labels, k), predict_cumulative(w, forest.labels, c)):
                preds.append(pred)
                if abs(sum(e.normalized_weight for e in expl.entries) - 1.0) > 1e-9:
                    bad.append(("explanation", name))
            if forest.label_kind == "classification":
                for p in preds:
                    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                        bad.append(("prediction", name))
    record(3, pairs >= 1000 and not bad, f"{pairs} (forest, x) pairs, {len(bad)} violations (tol 1e-9)")


def test_4_selection_contracts(three_forests):
    forests, _ = three_forests
    start = time.perf_counter()
    ks = (1, 3, 5, 10, 20, 50)
    cs = [round(0.1 * i, 1) for i in range(1, 11)]
    violations = 0
    checked = 0
    for forest, X in forests.values():
        for w in forest_weights_many(forest, X):
            prev = 0.0
            for k in ks:
                _, expl = predict_top_k(w, forest.labels, k)
                violations += len(expl) > k or expl.achieved_weight < prev
                prev = expl.achieved_weight
                checked += 1
            prev_n = 0
            for c in cs:
                _, expl = predict_cumulative(w, forest.labels, c)
                violations += expl.achieved_weight < c or len(expl) < prev_n
                prev_n = len(expl)
                checked += 1
    seconds = time.perf_counter() - start
    record(4, violations == 0 and seconds < 120, f"{checked} selections, {violations} violations, {seconds:.1f}s (< 120s)")


def _synthetic_sweep(sweep):
    return ExperimentConfig.from_dict(
        {
            "dataset": {"builtin": "synthetic", "n": 1000, "d": 20, "seed": 0},
            "folds": 5,
            "seed": 0,
            "params": {"n_trees": 100},
            "sweep": sweep,
        }
    )


def test_5_trend_trees_and_leaf_size():
    start = time.perf_counter()
    trees = run_experiment(_synthetic_sweep({"tree_counts": [25, 50, 100, 200]}))
    leaves = run_experiment(_synthetic_sweep({"min_leaf_sizes": [1, 5, 10, 20]}))
    n_trees = [r["N"] for r in trees.rows]
    n_leaf = [r["N"] for r in leaves.rows]
    increasing = all(b > a for a, b in zip(n_trees, n_trees[1:])) and all(b > a for a, b in zip(n_leaf, n_leaf[1:]))
    seconds = time.perf_counter() - start
    record(
        5,
        increasing and seconds < 300,
        f"N by trees {[round(v, 1) for v in n_trees]}, by min leaf {[round(v, 1) for v in n_leaf]}, {seconds:.1f}s (< 300s)",
    )


def test_6_performance_retention():
    start = time.perf_counter()
    reg = run_experiment(_synthetic_sweep({"top_k": [1, 3, 5, 10, 20, 50, 100000]}))
    full_rmse = reg.rows[-1]["RMSE"]
    assert reg.rows[-1]["W"] == 1.0
    ok_reg = [r["value"] for r in reg.rows[:-1] if r["RMSE"] <= 1.05 * full_rmse]
    digits = ExperimentConfig.from_dict(
        {
            "dataset": {"builtin": "digits"},
            "folds": 5,
            "seed": 0,
            "params": {"n_trees": 100},
            "sweep": {"top_k": [1, 3, 5, 10, 20, 100000]},
        }
    )
    clf = run_experiment(digits)
    full_acc = clf.rows[-1]["Acc"]
    ok_clf = [r["value"] for r in clf.rows[:-1] if r["Acc"] >= full_acc - 0.01]
    seconds = time.perf_counter() - start
    record(
        6,
        bool(ok_reg) and bool(ok_clf) and seconds < 300,
        f"regression k<=50 within 5% of RMSE {full_rmse:.3f}: {ok_reg}; "
        f"digits k<=20 within 0.01 of Acc {full_acc:.3f}: {ok_clf}; {seconds:.1f}s (< 300s)",
    )


def test_7_metric_oracles():
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        positive = rng.uniform(size=n) < rng.uniform(0.1, 0.9)
        if positive.all() or not positive.any():
            positive[0] = not positive[0]
        scores = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
        mismatches += binary_auc(scores, positive) != pair_count_auc(scores, positive)
    rmse_err = abs(rmse([0, 0], [3, 4]) - math.sqrt(25 / 2))
    corr_err = abs(pearson_corr([1, 2, 3], [1, 2, 4]) - 3 * math.sqrt(3 / 28))
    record(
        7,
        mismatches == 0 and rmse_err <= 1e-12 and corr_err <= 1e-12,
        f"AUC mismatches {mismatches}/100; rmse err {rmse_err:.1e}, corr err {corr_err:.1e} (tol 1e-12)",
    )


def test_8_determinism(three_forests, tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "dataset": {"builtin": "synthetic", "n": 300, "d": 6, "seed": 9},
            "folds": 4,
            "params": {"n_trees": 15},
            "sweep": {"top_k": [1, 5, 20]},
        }
    )
    first, second = tmp_path / "a", tmp_path / "b"
    run_experiment(cfg).write(first)
    run_experiment(cfg).write(second)
    same_report = (first / "report.json").read_bytes() == (second / "report.json").read_bytes()
    same_table = (first / "table.csv").read_bytes() == (second / "table.csv").read_bytes()
    forests, _ = three_forests
    lossless = True
    for forest, X in forests.values():
        again = Forest.from_json(forest.to_json())
        lossless &= again.to_json() == forest.to_json()
        lossless &= np.array_equal(predict_standard_many(again, X), predict_standard_many(forest, X))
        lossless &= json.loads(again.to_json()) == forest.to_dict()
    record(8, same_report and same_table and lossless, f"byte-identical reports={same_report and same_table}, forest round-trip lossless={lossless}")
