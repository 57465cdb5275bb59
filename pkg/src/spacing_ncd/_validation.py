"""Input validation helpers shared by the public modules."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, InvalidLabelError, LengthMismatchError


def as_float_matrix(x, name: str) -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatchError(f"{name} contains non-finite values")
    return arr


def as_float_vector(x, name: str) -> np.ndarray:
    """Coerce to a 1-D float64 array with finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatchError(f"{name} contains non-finite values")
    return arr


def as_int_vector(x, name: str) -> np.ndarray:
    """Coerce to a 1-D int64 array."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.asarray(arr, dtype=np.float64)
        if not np.all(np.isfinite(rounded)) or np.any(rounded != np.round(rounded)):
            raise InvalidLabelError(f"{name} must contain integers")
    return arr.astype(np.int64)


def check_same_length(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if len(a) != len(b):
        raise LengthMismatchError(
            f"{name_a} has length {len(a)} but {name_b} has length {len(b)}"
        )


def check_labels_in_range(labels: np.ndarray, n_classes: int, name: str) -> None:
    """Require every label to be a valid class index in [0, n_classes)."""
    if labels.size == 0:
        return
    lo, hi = labels.min(), labels.max()
    if lo < 0 or hi >= n_classes:
        raise InvalidLabelError(
            f"{name} must lie in [0, {n_classes}), got range [{lo}, {hi}]"
        )


def check_rng(seed_or_rng) -> np.random.Generator:
    """Accept an int seed or a Generator; return a Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
