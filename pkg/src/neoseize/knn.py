"""Exact k-nearest-neighbors baseline (Euclidean, brute force)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DataError


@dataclass(frozen=True)
class KnnModel:
    points: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if points.ndim != 2 or labels.shape != (points.shape[0],):
            raise ValueError("points must be (n, d) with one label per point")
        if not np.all(np.isfinite(points)):
            raise DataError("kNN points must be finite")
        if not 1 <= self.k <= points.shape[0]:
            raise ValueError(f"k={self.k} outside [1, {points.shape[0]}]")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def memory_bytes(self) -> int:
        """float32 points plus one byte per label."""
        n, d = self.points.shape
        return 4 * n * d + n


def _neighbor_order(points: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Training indices sorted by distance for each query; ties -> lower index."""
    if X.shape[-1] != points.shape[1]:
        raise DimensionMismatch(f"kNN model has {points.shape[1]} dims, query has {X.shape[-1]}")
    n, d = points.shape
    block = max(1, 4_000_000 // max(1, n * d))
    out = np.empty((X.shape[0], n), dtype=np.int64)
    for start in range(0, X.shape[0], block):
        diff = X[start : start + block, None, :] - points[None, :, :]
        dist = np.einsum("qnd,qnd->qn", diff, diff)
        out[start : start + block] = np.argsort(dist, axis=1, kind="stable")
    return out


def _votes(labels: np.ndarray, order: np.ndarray, k: int) -> np.ndarray:
    return labels[order[:, :k]].mean(axis=1)


def vote_fraction(model: KnnModel, X) -> np.ndarray:
    """Fraction of class-1 labels among the k neighbors of each query."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return _votes(model.labels, _neighbor_order(model.points, X), model.k)


def knn_predict(model: KnnModel, x):
    """Majority vote of the k nearest points; vote ties go to class 1."""
    x = np.asarray(x, dtype=np.float64)
    pred = (vote_fraction(model, x) >= 0.5).astype(np.int64)
    return int(pred[0]) if x.ndim == 1 else pred


def knn_select_k(train: tuple, val: tuple, k_grid) -> int:
    """k from ``k_grid`` with the best validation accuracy; ties -> smaller k.

    ``train`` and ``val`` are ``(X, y)`` pairs. Grid entries larger than the
    training set are skipped.
    """
    k_grid = sorted(set(int(k) for k in k_grid))
    if not k_grid:
        raise ValueError("k_grid is empty")
    Xt, yt = np.asarray(train[0], dtype=np.float64), np.asarray(train[1], dtype=np.int64)
    Xv, yv = np.asarray(val[0], dtype=np.float64), np.asarray(val[1], dtype=np.int64)
    usable = [k for k in k_grid if 1 <= k <= Xt.shape[0]]
    if not usable:
        raise DataError(f"no k in {k_grid} fits a training set of {Xt.shape[0]} points")
    if len(usable) == 1:
        return usable[0]
    order = _neighbor_order(Xt, np.atleast_2d(Xv))
    best_k, best_acc = usable[0], -1.0
    for k in usable:
        acc = float(np.mean((_votes(yt, order, k) >= 0.5).astype(np.int64) == yv))
        if acc > best_acc:
            best_k, best_acc = k, acc
    return best_k
