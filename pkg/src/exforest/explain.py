"""Predictions restricted to the top-weighted training examples.

Two selection rules are offered: a fixed number ``k`` of examples, or the
shortest prefix of the sorted weights whose cumulative weight reaches ``c``.
Either way the selected weights are renormalized and the returned
:class:`Explanation` holds every number the prediction was computed from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import LabelMatrix
from .weights import WeightVector, combine

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Entry:
    training_index: int
    raw_weight: float
    normalized_weight: float
    label_row: tuple


@dataclass(frozen=True)
class Explanation:
    entries: tuple
    achieved_weight: float
    selection: str  # "top_k" or "cumulative"
    parameter: float

    def __len__(self):
        return len(self.entries)

    def prediction(self) -> np.ndarray:
        """Recompute the prediction from the entries alone."""
        return combine(
            [e.normalized_weight for e in self.entries],
            [e.label_row for e in self.entries],
        )

    def to_dict(self, example_ids=None, class_names=None) -> dict:
        rows = []
        for e in self.entries:
            rows.append(
                {
                    "index": e.training_index,
                    "example_id": e.training_index if example_ids is None else example_ids[e.training_index],
                    "raw_weight": e.raw_weight,
                    "normalized_weight": e.normalized_weight,
                    "label": list(e.label_row),
                }
            )
        doc = {
            "schema_version": SCHEMA_VERSION,
            "selection": {"rule": self.selection, self._param_name(): self.parameter},
            "achieved_weight": self.achieved_weight,
            "entries": rows,
        }
        if class_names:
            doc["class_names"] = list(class_names)
        return doc

    def to_json(self, example_ids=None, class_names=None) -> str:
        return json.dumps(self.to_dict(example_ids, class_names))

    def _param_name(self):
        return "k" if self.selection == "top_k" else "c"


def sorted_index(weights: WeightVector) -> np.ndarray:
    """Support indices by weight, heaviest first; equal weights by ascending index."""
    if len(weights) == 0:
        raise ValueError("weight vector has empty support")
    # lexsort: last key is primary
    return weights.indices[np.lexsort((weights.indices, -weights.values))]


def _select(weights: WeightVector, labels: LabelMatrix, n_keep: int, rule: str, parameter):
    if weights.n_train != labels.n:
        raise ValueError("weights and labels cover different training sets")
    order = np.lexsort((weights.indices, -weights.values))
    idx = weights.indices[order]
    raw = weights.values[order]
    n_keep = min(n_keep, idx.size)
    idx, raw = idx[:n_keep], raw[:n_keep]
    if n_keep == len(weights):
        # the whole vector already sums to one
        norm, achieved = raw, 1.0
    else:
        z = np.cumsum(raw)[-1]
        norm, achieved = raw / z, min(float(z), 1.0)
    rows = labels.values[idx]
    entries = tuple(
        Entry(int(i), float(r), float(nw), tuple(float(v) for v in row))
        for i, r, nw, row in zip(idx, raw, norm, rows)
    )
    explanation = Explanation(entries, achieved, rule, parameter)
    return combine(norm, rows), explanation


def predict_top_k(weights: WeightVector, labels: LabelMatrix, k: int):
    """Prediction from the ``k`` heaviest examples (fewer if the support is smaller)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return _select(weights, labels, int(k), "top_k", int(k))


def predict_cumulative(weights: WeightVector, labels: LabelMatrix, c: float):
    """Prediction from the shortest heaviest-first prefix with cumulative weight >= ``c``."""
    if not 0.0 < c <= 1.0:
        raise ValueError("c must lie in (0, 1]")
    z = np.cumsum(weights.values[np.lexsort((weights.indices, -weights.values))])
    hits = np.flatnonzero(z >= c)
    # rounding can leave the full sum a hair below c == 1.0
    n_keep = int(hits[0]) + 1 if hits.size else z.size
    return _select(weights, labels, n_keep, "cumulative", float(c))
