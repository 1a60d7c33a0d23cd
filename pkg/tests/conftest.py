import numpy as np
import pytest

from exforest import HyperParams, fit
from exforest.data import Dataset, LabelMatrix, binarize_by_mean, equal_width_bin
from exforest.datasets import make_synthetic_regression


@pytest.fixture(scope="session")
def reg_data():
    return make_synthetic_regression(n=200, d=8, seed=3)


@pytest.fixture(scope="session")
def reg_forest(reg_data):
    return fit(reg_data, HyperParams(n_trees=20, seed=11))


@pytest.fixture(scope="session")
def binary_data(reg_data):
    return reg_data.with_labels(binarize_by_mean(reg_data.labels.values[:, 0]))


@pytest.fixture(scope="session")
def binary_forest(binary_data):
    return fit(binary_data, HyperParams(n_trees=20, seed=5, task="classification"))


@pytest.fixture(scope="session")
def multi_data(reg_data):
    return reg_data.with_labels(equal_width_bin(reg_data.labels.values[:, 0], 10))


@pytest.fixture(scope="session")
def multi_forest(multi_data):
    return fit(multi_data, HyperParams(n_trees=20, seed=7, task="classification"))


@pytest.fixture(scope="session")
def probes():
    return np.random.default_rng(99).uniform(-1.2, 1.2, size=(30, 8))


@pytest.fixture(params=["reg", "binary", "multi"])
def any_forest(request, reg_forest, binary_forest, multi_forest):
    return {"reg": reg_forest, "binary": binary_forest, "multi": multi_forest}[request.param]


def tiny_dataset(X, y, task="regression"):
    X = np.asarray(X, dtype=float)
    if task == "regression":
        return Dataset(X, LabelMatrix.regression(y))
    classes = sorted(set(y))
    return Dataset(X, LabelMatrix.one_hot([classes.index(v) for v in y], classes))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
