"""k-nearest-neighbor classification; score is the positive-neighbor fraction."""

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KnnModel:
    X_train: np.ndarray
    y_train: np.ndarray
    k: int

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        # squared Euclidean distances, ties broken by training-row order (stable sort)
        d2 = ((X[:, None, :] - self.X_train[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return self.y_train[nearest].mean(axis=1)

    def describe(self):
        return {"k": int(self.k), "n_train": int(self.X_train.shape[0])}


def fit_knn(X, y, k=5):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if k > n:
        warnings.warn(f"knn: k={k} exceeds {n} training rows; clamped to {n}")
        k = n
    return KnnModel(X_train=X.copy(), y_train=y.copy(), k=int(k))
