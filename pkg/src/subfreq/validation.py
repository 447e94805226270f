"""Input checks shared by the statistics code."""

from __future__ import annotations

import numpy as np


def check_vector(x, name: str = "x", min_len: int = 1) -> np.ndarray:
    """1-D finite float array of length >= ``min_len``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if len(arr) < min_len:
        raise ValueError(f"{name} needs at least {min_len} values, got {len(arr)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_paired(x, y, min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    x = check_vector(x, "x", min_len)
    y = check_vector(y, "y", min_len)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    return x, y


def check_correlation(r: float, name: str = "r") -> float:
    r = float(r)
    if not -1.0 < r < 1.0:
        raise ValueError(f"{name} must be in (-1, 1), got {r}")
    return r
