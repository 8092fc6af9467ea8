"""Standardized PCA fitted by thin SVD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionMismatch, TargetDimExceedsFeatureDim, TooFewSamples

PCA_DIMS = (20, 50, 70, 100)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (D,)
    scale: np.ndarray  # (D,), zero-std features get 1
    components: np.ndarray  # (d, D), orthonormal rows
    explained_variance_ratio: np.ndarray  # (d,)

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def standardize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} features, got {x.shape[-1]}")
        return (x - self.mean) / self.scale

    def transform(self, x) -> np.ndarray:
        """Project one vector ``(D,)`` or a batch ``(n, D)``."""
        return self.standardize(x) @ self.components.T

    def inverse_transform(self, z) -> np.ndarray:
        """Back to standardized feature space."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.n_components:
            raise DimensionMismatch(f"expected {self.n_components} coordinates, got {z.shape[-1]}")
        return z @ self.components


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each row made positive; first index wins ties
    pivot = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def fit(X, d: int) -> PcaModel:
    """Fit a ``d``-component PCA on the z-scored rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D (samples, features)")
    n, D = X.shape
    if not np.all(np.isfinite(X)):
        raise DataError("PCA input contains NaN or infinite values")
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > D:
        raise TargetDimExceedsFeatureDim(f"d={d} exceeds feature dimension {D}")
    if n <= d:
        raise TooFewSamples(f"PCA to d={d} needs more than {d} samples, got {n}")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale
    _, s, vt = np.linalg.svd(Xs, full_matrices=False)
    variances = s**2 / (n - 1)
    total = variances.sum()
    ratio = variances[:d] / total if total > 0 else np.zeros(d)
    return PcaModel(
        mean=mean,
        scale=scale,
        components=_fix_signs(vt[:d]),
        explained_variance_ratio=ratio,
    )
