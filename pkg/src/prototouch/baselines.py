"""k-nearest-neighbor comparison models.

Distances are Euclidean in the same normalized [q; tau] space the MLP
consumes, so the comparison is apples-to-apples. Brute-force scan: datasets
here are desk-scale.
"""

from __future__ import annotations

import numpy as np

from prototouch.dataset import Dataset, fit_normalization, normalize

DEFAULT_K = 3


class _KnnBase:
    def __init__(self, k: int = DEFAULT_K):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.stats = None
        self._x = None

    def _fit_inputs(self, train: Dataset, stats):
        if len(train) == 0:
            raise ValueError("empty training set")
        if self.k > len(train):
            raise ValueError(f"k={self.k} exceeds training size {len(train)}")
        self.stats = stats if stats is not None else fit_normalization(train)
        self._x = normalize(train.inputs(), self.stats)

    def _neighbors(self, q, tau) -> np.ndarray:
        """Indices of the k nearest training samples, nearest first."""
        if self._x is None:
            raise ValueError("fit before querying")
        query = normalize(np.concatenate([np.asarray(q, float), np.asarray(tau, float)]), self.stats)
        d2 = np.sum((self._x - query) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")
        return order[: self.k]


class KnnRegressor(_KnnBase):
    def fit(self, train: Dataset, stats=None) -> "KnnRegressor":
        self._fit_inputs(train, stats)
        self._targets = train.targets()
        return self

    def predict_location(self, q, tau) -> np.ndarray:
        """Mean of the k nearest neighbors' contact locations."""
        return self._targets[self._neighbors(q, tau)].mean(axis=0)


class KnnClassifier(_KnnBase):
    def fit(self, train: Dataset, stats=None) -> "KnnClassifier":
        self._fit_inputs(train, stats)
        self._labels = train.labels()
        return self

    def predict_label(self, q, tau) -> int:
        """Majority vote; a tie goes to the tied label seen nearest."""
        votes = self._labels[self._neighbors(q, tau)]
        counts = {}
        for label in votes:
            counts[label] = counts.get(label, 0) + 1
        best = max(counts.values())
        for label in votes:  # nearest-first order
            if counts[label] == best:
                return int(label)
        raise AssertionError("unreachable")


def knn_regress(train: Dataset, q, tau, k: int = DEFAULT_K) -> np.ndarray:
    return KnnRegressor(k).fit(train).predict_location(q, tau)


def knn_classify(train: Dataset, q, tau, k: int = DEFAULT_K) -> int:
    return KnnClassifier(k).fit(train).predict_label(q, tau)
