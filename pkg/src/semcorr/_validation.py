"""Small input-checking helpers in the spirit of ``sklearn.utils.validation``."""

import numpy as np
from sklearn.utils.validation import check_array

from .errors import DimensionMismatch


def check_features(X, n_rows=None, n_cols=None, name="features"):
    """Return ``X`` as a finite 2-D float64 array, optionally checking its shape."""
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    except ValueError as exc:
        raise DimensionMismatch(f"{name}: {exc}") from exc
    if n_rows is not None and X.shape[0] != n_rows:
        raise DimensionMismatch(f"{name}: expected {n_rows} rows, got {X.shape[0]}")
    if n_cols is not None and X.shape[1] != n_cols:
        raise DimensionMismatch(f"{name}: expected {n_cols} columns, got {X.shape[1]}")
    return X


def check_vector(x, n=None, name="values", dtype=np.float64):
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name}: expected a 1-D array, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"{name}: expected length {n}, got {x.shape[0]}")
    return x


def check_indices(idx, upper, name="indices"):
    """Validate an integer index array against ``[0, upper)``."""
    idx = np.asarray(idx)
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        if not np.all(np.equal(np.mod(idx, 1), 0)):
            raise DimensionMismatch(f"{name}: indices must be integers")
    idx = idx.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= upper):
        raise DimensionMismatch(f"{name}: index out of range [0, {upper})")
    return idx


def row_normalize(X, eps=1e-12):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.maximum(norms, eps)
