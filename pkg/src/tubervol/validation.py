"""Small input-validation helpers used across modules.

These mirror the scikit-learn ``check_array`` habit: normalize early,
fail loudly with the offending shape in the message.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, NonFiniteError


def ensure_points(points, *, name: str = "points", allow_empty: bool = False) -> np.ndarray:
    """Return ``points`` as a float64 array of shape (n, 3)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 0:
        pts = pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DegenerateInputError(f"{name} must have shape (n, 3), got {pts.shape}")
    if not allow_empty and len(pts) == 0:
        raise DegenerateInputError(f"{name} is empty")
    if pts.size and not np.isfinite(pts).all():
        raise NonFiniteError(f"{name} contains non-finite coordinates")
    return pts


def ensure_vector(vec, length: int, *, name: str = "vector") -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64).ravel()
    if v.shape != (length,):
        raise DegenerateInputError(f"{name} must have length {length}, got shape {np.asarray(vec).shape}")
    if not np.isfinite(v).all():
        raise NonFiniteError(f"{name} contains non-finite values")
    return v


def as_rng(seed) -> np.random.Generator:
    """Accept a seed or a Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
