"""Bagged CART trees whose leaves remember the bootstrap multiplicity of their members."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .data import REGRESSION, TASKS, Dataset, LabelMatrix

FORMAT_NAME = "exforest.forest"
FORMAT_VERSION = 1

WORKERS_ENV = "EXFOREST_WORKERS"


@dataclass(frozen=True)
class HyperParams:
    """Forest hyperparameters.

    ``max_features`` is ``"all"``, ``"sqrt"``, a fraction in (0, 1], or ``None``
    for the task default (all features for regression, sqrt for classification).
    """

    n_trees: int = 100
    min_samples_leaf: int = 1
    max_features: Union[str, float, None] = None
    seed: int = 0
    task: str = REGRESSION

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        mf = self.max_features
        if mf is None or mf in ("all", "sqrt"):
            return
        if isinstance(mf, str) or isinstance(mf, bool) or not 0.0 < float(mf) <= 1.0:
            raise ValueError(f"max_features must be 'all', 'sqrt' or a fraction in (0, 1], got {mf!r}")

    def n_candidate_features(self, d: int) -> int:
        mf = self.max_features
        if mf is None:
            mf = "all" if self.task == REGRESSION else "sqrt"
        if mf == "all":
            return d
        if mf == "sqrt":
            return max(1, int(math.sqrt(d)))
        return max(1, int(float(mf) * d))

    def replace(self, **changes) -> "HyperParams":
        return HyperParams(**{**asdict(self), **changes})


class Leaf:
    """Terminal node: training members with their bag counts and the cached prediction."""

    __slots__ = ("indices", "counts", "prediction", "__dict__")

    def __init__(self, indices, counts, prediction):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.prediction = np.asarray(prediction, dtype=float)
        if self.indices.size == 0:
            raise ValueError("a leaf must hold at least one training example")
        if self.indices.shape != self.counts.shape or np.any(self.counts < 1):
            raise ValueError("bag counts must be positive and aligned with indices")

    @property
    def bag_counts(self) -> dict:
        return {int(i): int(c) for i, c in zip(self.indices, self.counts)}

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def weights(self) -> np.ndarray:
        # per-member share of the leaf's bag: b_i / sum_j b_j
        return self.counts / self.counts.sum()

    def __repr__(self):
        return f"Leaf({self.bag_counts}, prediction={self.prediction.tolist()})"


class Split:
    __slots__ = ("feature", "threshold", "left", "right")

    def __init__(self, feature: int, threshold: float, left, right):
        self.feature = int(feature)
        self.threshold = float(threshold)
        self.left = left
        self.right = right

    def __repr__(self):
        return f"Split(x[{self.feature}] < {self.threshold!r})"


def tree_apply(tree, x) -> Leaf:
    """Route ``x`` to its leaf: values below the threshold go left, the rest right."""
    node = tree
    while isinstance(node, Split):
        node = node.left if x[node.feature] < node.threshold else node.right
    return node


def iter_leaves(tree):
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            yield node
        else:
            stack.append(node.right)
            stack.append(node.left)


class _FlatTree:
    """Array layout of one tree for routing many rows at once."""

    def __init__(self, root):
        feature, threshold, left, right, leaves, leaf_of = [], [], [], [], [], []
        stack = [(root, None, None)]
        while stack:
            node, parent, side = stack.pop()
            nid = len(feature)
            if parent is not None:
                (left if side == 0 else right)[parent] = nid
            if isinstance(node, Leaf):
                feature.append(-1)
                threshold.append(0.0)
                leaf_of.append(len(leaves))
                leaves.append(node)
                left.append(-1)
                right.append(-1)
            else:
                feature.append(node.feature)
                threshold.append(node.threshold)
                leaf_of.append(-1)
                left.append(-1)
                right.append(-1)
                stack.append((node.right, nid, 1))
                stack.append((node.left, nid, 0))
        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=float)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.leaf_of = np.array(leaf_of, dtype=np.int64)
        self.leaves = leaves

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf position (into ``self.leaves``) reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.arange(X.shape[0])
        while active.size:
            f = self.feature[node[active]]
            internal = f >= 0
            active, f = active[internal], f[internal]
            if not active.size:
                break
            here = node[active]
            go_left = X[active, f] < self.threshold[here]
            node[active] = np.where(go_left, self.left[here], self.right[here])
        return self.leaf_of[node]


class Forest:
    """A fitted ensemble together with the training labels its leaves refer to."""

    def __init__(
        self,
        trees: list,
        n_train: int,
        params: HyperParams,
        labels: LabelMatrix,
        feature_names: Optional[tuple] = None,
        example_ids: Optional[tuple] = None,
        n_features: Optional[int] = None,
    ):
        if labels.n != n_train:
            raise ValueError("label rows must equal n_train")
        self.trees = list(trees)
        self.n_train = int(n_train)
        self.params = params
        self.labels = labels
        self.feature_names = None if feature_names is None else tuple(feature_names)
        self.example_ids = tuple(range(n_train)) if example_ids is None else tuple(example_ids)
        self.n_features = n_features

    @property
    def label_kind(self) -> str:
        return self.labels.kind

    @property
    def m(self) -> int:
        return self.labels.m

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @cached_property
    def _flat(self) -> list:
        return [_FlatTree(t) for t in self.trees]

    def apply(self, X) -> list:
        """Per tree, the leaf reached by each row of ``X`` (a list of lists of Leaf)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = []
        for flat in self._flat:
            pos = flat.apply(X)
            out.append([flat.leaves[p] for p in pos])
        return out

    def truncated(self, n_trees: int) -> "Forest":
        """The forest made of the first ``n_trees`` trees.

        Tree ``t`` depends only on ``seed + t``, so this equals fitting with
        ``n_trees`` directly.
        """
        if not 1 <= n_trees <= len(self.trees):
            raise ValueError(f"n_trees must be in [1, {len(self.trees)}]")
        return Forest(
            self.trees[:n_trees],
            self.n_train,
            self.params.replace(n_trees=n_trees),
            self.labels,
            self.feature_names,
            self.example_ids,
            self.n_features,
        )

    # serialization

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "params": asdict(self.params),
            "n_train": self.n_train,
            "n_features": self.n_features,
            "label_kind": self.label_kind,
            "m": self.m,
            "class_names": list(self.labels.class_names),
            "feature_names": None if self.feature_names is None else list(self.feature_names),
            "example_ids": list(self.example_ids),
            "labels": self.labels.values.tolist(),
            "trees": [_node_to_dict(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        if doc.get("format") != FORMAT_NAME:
            raise ValueError("not a serialized forest")
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format version {doc.get('version')!r}")
        labels = LabelMatrix(doc["label_kind"], np.array(doc["labels"], dtype=float), tuple(doc["class_names"]))
        return cls(
            [_node_from_dict(t) for t in doc["trees"]],
            doc["n_train"],
            HyperParams(**doc["params"]),
            labels,
            doc.get("feature_names"),
            doc.get("example_ids"),
            doc.get("n_features"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Forest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _node_to_dict(node) -> dict:
    if isinstance(node, Leaf):
        return {
            "bag_counts": {str(i): c for i, c in node.bag_counts.items()},
            "prediction": node.prediction.tolist(),
        }
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc: dict):
    if "bag_counts" in doc:
        items = sorted((int(i), int(c)) for i, c in doc["bag_counts"].items())
        return Leaf([i for i, _ in items], [c for _, c in items], doc["prediction"])
    return Split(doc["feature"], doc["threshold"], _node_from_dict(doc["left"]), _node_from_dict(doc["right"]))


# induction


def _best_split(xn, Y, idx, w, features, min_leaf):
    """Best (feature, threshold) over the columns ``features`` of ``xn``, or None.

    ``xn`` holds the node's rows of the feature matrix. Both criteria reduce to
    maximizing sum_j S_lj^2 / W_l + S_rj^2 / W_r over the weighted label sums
    of the two children: squared error for a single real column, Gini impurity
    for one-hot columns.
    """
    wy = w[:, None] * Y[idx]
    total_w = w.sum()
    total_s = wy.sum(axis=0)
    xf = xn[:, features]
    order = np.argsort(xf, axis=0, kind="stable")
    xs = xf[order, np.arange(features.size)]
    cw = np.cumsum(w[order], axis=0)[:-1]
    rw = total_w - cw
    valid = (xs[:-1] < xs[1:]) & (cw >= min_leaf) & (rw >= min_leaf)
    if not valid.any():
        return None
    cs = np.cumsum(wy[order], axis=0)[:-1]
    score = np.einsum("ijk,ijk->ij", cs, cs) / cw
    cs -= total_s
    score += np.einsum("ijk,ijk->ij", cs, cs) / rw
    score[~valid] = -np.inf
    # row-major argmax over (feature, position): lowest feature, then lowest threshold
    flat = int(np.argmax(score.T))
    j, pos = divmod(flat, score.shape[0])
    lo, hi = xs[pos, j], xs[pos + 1, j]
    threshold = lo / 2.0 + hi / 2.0
    if threshold <= lo or threshold > hi:
        threshold = hi
    return int(features[j]), float(threshold)


def _make_leaf(Y, idx, w) -> Leaf:
    prediction = w @ Y[idx] / w.sum()
    return Leaf(idx, w.astype(np.int64), prediction)


def grow_tree(X: np.ndarray, Y: np.ndarray, bag: np.ndarray, params: HyperParams, rng) -> object:
    """Grow one tree on the multiset given by ``bag`` (bootstrap count per training row)."""
    d = X.shape[1]
    mtry = params.n_candidate_features(d)
    min_leaf = params.min_samples_leaf
    idx0 = np.flatnonzero(bag)
    root_slot = [None]
    # (member indices, their bag counts, container, key)
    stack = [(idx0, bag[idx0].astype(float), root_slot, 0)]
    while stack:
        idx, w, parent, key = stack.pop()
        node = None
        node_y = Y[idx]
        if idx.size > 1 and w.sum() >= 2 * min_leaf and not (node_y == node_y[0]).all():
            xn = X[idx]
            varying = xn.max(axis=0) > xn.min(axis=0)
            perm = rng.permutation(d)
            features = perm[varying[perm]][:mtry]
            if features.size:
                features.sort()
                found = _best_split(xn, Y, idx, w, features, min_leaf)
                if found is not None:
                    f, threshold = found
                    go_left = xn[:, f] < threshold
                    node = Split(f, threshold, None, None)
                    go_right = ~go_left
                    stack.append((idx[go_right], w[go_right], node, "right"))
                    stack.append((idx[go_left], w[go_left], node, "left"))
        if node is None:
            node = _make_leaf(Y, idx, w)
        if isinstance(parent, list):
            parent[key] = node
        else:
            setattr(parent, key, node)
    return root_slot[0]


def bootstrap_counts(n: int, rng) -> np.ndarray:
    return np.bincount(rng.integers(0, n, size=n), minlength=n)


def _fit_one(X, Y, params: HyperParams, t: int):
    rng = np.random.default_rng(params.seed + t)
    bag = bootstrap_counts(X.shape[0], rng)
    return grow_tree(X, Y, bag, params, rng)


_WORKER_STATE = {}


def _init_worker(X, Y, params):
    _WORKER_STATE.update(X=X, Y=Y, params=params)


def _fit_in_worker(t):
    s = _WORKER_STATE
    return _fit_one(s["X"], s["Y"], s["params"], t)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def fit(dataset: Dataset, params: HyperParams, n_jobs: Optional[int] = None) -> Forest:
    """Fit ``params.n_trees`` trees, each on its own bootstrap sample of size n.

    Tree ``t`` draws its bootstrap and feature subsets from a PCG64 stream
    seeded with ``params.seed + t``. Trees may be grown in worker processes;
    the result does not depend on ``n_jobs``.
    """
    if dataset.task != params.task:
        raise ValueError(f"task {params.task!r} does not match {dataset.task!r} labels")
    if dataset.n < 1:
        raise ValueError("cannot fit on an empty dataset")
    X = np.ascontiguousarray(dataset.features)
    Y = np.ascontiguousarray(dataset.labels.values)
    n_jobs = default_workers() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs == 1 or params.n_trees == 1:
        trees = [_fit_one(X, Y, params, t) for t in range(params.n_trees)]
    else:
        with ProcessPoolExecutor(n_jobs, initializer=_init_worker, initargs=(X, Y, params)) as pool:
            trees = list(pool.map(_fit_in_worker, range(params.n_trees), chunksize=4))
    return Forest(
        trees,
        dataset.n,
        params,
        dataset.labels,
        dataset.feature_names,
        dataset.example_ids,
        dataset.d,
    )


def predict_standard(forest: Forest, x) -> np.ndarray:
    """Tree-averaged prediction: the mean of the leaf predictions reached by ``x``."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(forest.m)
    for tree in forest.trees:
        total += tree_apply(tree, x).prediction
    return total / len(forest.trees)


def predict_standard_many(forest: Forest, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    total = np.zeros((X.shape[0], forest.m))
    for flat in forest._flat:
        preds = np.array([leaf.prediction for leaf in flat.leaves])
        total += preds[flat.apply(X)]
    return total / len(forest.trees)
