"""Small input-validation helpers shared across estimators."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from .errors import ConfigError, NumericError, ShapeError


def check_fitted(estimator, attr: str) -> None:
    if not hasattr(estimator, attr):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )


def check_embedding_dim(provider, expected: int) -> None:
    if provider.dim != expected:
        raise ConfigError(
            f"provider embeds at dim {provider.dim}, model expects {expected}; "
            "mixing embedding dimensions is rejected"
        )


def check_vector(name: str, x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ShapeError(f"{name} must be a flat vector of length {dim}, got {arr.shape}")
    return arr


def ensure_finite(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr
