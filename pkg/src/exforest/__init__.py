"""Random forests whose predictions decompose exactly into weighted training examples."""

from .data import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    FoldPlan,
    LabelMatrix,
    binarize_by_mean,
    equal_width_bin,
    export_csv,
    kfold_split,
    load_csv,
    nested_subsample,
)
from .explain import Explanation, predict_cumulative, predict_top_k, sorted_index
from .forest import Forest, HyperParams, Leaf, Split, fit, predict_standard, tree_apply
from .weights import (
    WeightVector,
    effective_count,
    forest_weights,
    forest_weights_many,
    predict_from_weights,
    tree_weights,
)

__version__ = "0.1.0"
