"""Input validation helpers.

Small checked conversions used at the public API boundary so that the numeric
core can assume well-formed float64 arrays.
"""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str = "array") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_vector(x, dims: int | None = None, name: str = "vector") -> np.ndarray:
    vec = np.atleast_1d(as_float_array(x, name))
    if vec.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {vec.shape}")
    if dims is not None and vec.shape[0] != dims:
        raise ValueError(f"{name} must have length {dims}, got {vec.shape[0]}")
    return vec


def check_times(times, name: str = "times") -> np.ndarray:
    t = np.atleast_1d(as_float_array(times, name))
    if t.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {t.shape}")
    if t.size >= 2 and not np.all(np.diff(t) > 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
        raise ValueError(f"{name} must be strictly increasing (violated at index {bad})")
    return t


def check_positions(positions, n_times: int | None = None, name: str = "positions") -> np.ndarray:
    """Coerce to a (samples, dims) matrix; 1-D input is treated as a single axis."""
    pos = as_float_array(positions, name)
    if pos.ndim == 1:
        pos = pos[:, None]
    if pos.ndim != 2:
        raise ValueError(f"{name} must be a (samples, dims) matrix, got shape {pos.shape}")
    if n_times is not None and pos.shape[0] != n_times:
        raise ValueError(
            f"{name} has {pos.shape[0]} rows but {n_times} sample times were given"
        )
    return pos


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return the array with its write flag cleared (shared, not copied)."""
    arr.flags.writeable = False
    return arr
