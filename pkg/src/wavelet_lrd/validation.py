"""Input checks shared by the transformers, the estimator and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

__all__ = ["as_series", "as_series_batch"]


def as_series(x, min_length: int = 1, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite 1-D float array of length at least ``min_length``."""
    arr = check_array(x, ensure_2d=False, dtype=np.float64, input_name=name)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(f"{name} needs at least {min_length} observations, got {arr.shape[0]}")
    return arr


def as_series_batch(x, min_length: int = 1, name: str = "X") -> np.ndarray:
    """Return ``x`` as a finite 2-D float array ``(n_series, n_obs)``; a 1-D input becomes one row."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = arr[None, :]
    arr = check_array(arr, dtype=np.float64, input_name=name, ensure_min_features=min_length)
    return arr
