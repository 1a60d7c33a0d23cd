"""Training-example weights behind a forest prediction.

For a test object the forest assigns every training example the average, over
trees, of its share of the bag in the leaf the object reaches. The forest
prediction is then the weighted sum of training labels.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .data import LabelMatrix
from .forest import Forest, tree_apply


class WeightVector:
    """Sparse weights over ``n_train`` training examples; absent entries are zero.

    Only strictly positive weights are stored, with indices in ascending order.
    """

    __slots__ = ("n_train", "indices", "values")

    def __init__(self, n_train: int, indices, values):
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if indices.shape != values.shape or indices.ndim != 1:
            raise ValueError("indices and values must be aligned 1-d arrays")
        if indices.size and (indices.min() < 0 or indices.max() >= n_train):
            raise ValueError("weight index outside the training set")
        if np.any(values <= 0):
            raise ValueError("stored weights must be strictly positive")
        order = np.argsort(indices, kind="stable")
        self.n_train = int(n_train)
        self.indices = indices[order]
        self.values = values[order]

    @classmethod
    def from_dict(cls, n_train: int, entries: dict) -> "WeightVector":
        items = sorted(entries.items())
        return cls(n_train, [i for i, _ in items], [v for _, v in items])

    @property
    def entries(self) -> dict:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def total(self) -> float:
        return math.fsum(self.values)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.n_train)
        out[self.indices] = self.values
        return out

    def __len__(self):
        return self.indices.size

    def __repr__(self):
        return f"WeightVector(n_train={self.n_train}, {self.entries})"

    def to_dict(self, example_ids=None) -> dict:
        """JSON-ready payload, heaviest weight first (ties by ascending index)."""
        order = np.lexsort((self.indices, -self.values))
        rows = []
        for p in order:
            i = int(self.indices[p])
            row = {"index": i, "weight": float(self.values[p])}
            if example_ids is not None:
                row["example_id"] = example_ids[i]
            rows.append(row)
        return {"n_train": self.n_train, "weights": rows}

    def to_json(self, example_ids=None) -> str:
        return json.dumps(self.to_dict(example_ids))


def tree_weights(tree, x, n_train: int) -> WeightVector:
    leaf = tree_apply(tree, x)
    return WeightVector(n_train, leaf.indices, leaf.weights)


def _average(leaves, n_train: int) -> WeightVector:
    acc = np.zeros(n_train)
    for leaf in leaves:
        acc[leaf.indices] += leaf.weights
    support = np.flatnonzero(acc)
    return WeightVector(n_train, support, acc[support] / len(leaves))


def forest_weights(forest: Forest, x) -> WeightVector:
    """Mean of the per-tree weight vectors, accumulated in tree order."""
    x = np.asarray(x, dtype=float)
    return _average([tree_apply(t, x) for t in forest.trees], forest.n_train)


def forest_weights_many(forest: Forest, X) -> list:
    """:func:`forest_weights` for every row of ``X``."""
    per_tree = forest.apply(X)
    n_rows = len(per_tree[0]) if per_tree else 0
    return [_average([leaves[r] for leaves in per_tree], forest.n_train) for r in range(n_rows)]


def combine(weights, label_rows) -> np.ndarray:
    """Column-wise correctly rounded sum of ``weights[i] * label_rows[i]``.

    The result does not depend on the order of the rows, so any route to the
    same (weight, label) pairs yields identical floats.
    """
    products = np.asarray(weights, dtype=float)[:, None] * np.asarray(label_rows, dtype=float)
    return np.array([math.fsum(col) for col in products.T])


def predict_from_weights(weights: WeightVector, labels: LabelMatrix) -> np.ndarray:
    if weights.n_train != labels.n:
        raise ValueError(
            f"weight vector covers {weights.n_train} examples but labels have {labels.n} rows"
        )
    return combine(weights.values, labels.values[weights.indices])


def effective_count(weights: WeightVector) -> int:
    """Number of training examples with non-zero weight."""
    return len(weights)
