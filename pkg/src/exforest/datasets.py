"""Small bundled datasets for experiments and tests."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .data import CLASSIFICATION, Dataset, LabelMatrix, load_csv


def make_synthetic_regression(n: int = 1000, d: int = 20, noise: float = 0.5, seed: int = 0) -> Dataset:
    """Linear signal plus pairwise interactions plus Gaussian noise.

    Every feature carries signal: feature ``j`` gets a linear coefficient and
    takes part in one interaction ``x_j * x_{j+1}`` (for even ``j``), so dropping
    any block of columns loses information.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    coef = rng.uniform(0.5, 1.5, size=d) * np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    y = X @ coef
    for j in range(0, d - 1, 2):
        y += 1.5 * X[:, j] * X[:, j + 1]
    y += rng.normal(0.0, noise, size=n)
    return Dataset(X, LabelMatrix.regression(y), tuple(f"x{j}" for j in range(d)))


def digits_path():
    return resources.files("exforest").joinpath("datasets_data/digits.csv")


def load_digits() -> Dataset:
    """8x8 handwritten digits (1797 images, 64 pixel intensities 0..16, ten classes)."""
    with resources.as_file(digits_path()) as path:
        return load_csv(path, "digit", CLASSIFICATION)


def load_builtin(name: str, **options) -> Dataset:
    if name == "digits":
        return load_digits()
    if name == "synthetic":
        return make_synthetic_regression(**options)
    raise ValueError(f"unknown builtin dataset {name!r}")
