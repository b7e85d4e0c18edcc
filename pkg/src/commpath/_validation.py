"""Input checks shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


def as_components(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a complex array of shape ``(m, n, n)``.

    Accepts a :class:`~commpath.linalg.MatrixTuple`, a single square matrix
    (treated as a 1-tuple) or any array-like of square matrices.
    """
    comps = getattr(X, "components", X)
    arr = np.asarray(comps)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"{name} must be a tuple of square matrices, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must hold at least one non-empty matrix")
    if not np.issubdtype(arr.dtype, np.number):
        raise ValueError(f"{name} must be numeric")
    # a fixed memory layout keeps BLAS results independent of how X was built
    arr = np.ascontiguousarray(arr, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Return ``A`` as a finite complex square matrix."""
    arr = np.asarray(A)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    arr = arr.astype(complex, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_same_shape(A: np.ndarray, B: np.ndarray, names=("S", "T")) -> None:
    if A.shape != B.shape:
        raise ValueError(
            f"dimension mismatch: {names[0]} has shape {A.shape}, {names[1]} has shape {B.shape}"
        )


def check_positive(value, name: str, *, allow_zero: bool = False) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number")
    value = float(value)
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")
    return value
