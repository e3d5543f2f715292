"""Input-validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np


def as_matrix(x, name="matrix"):
    """Coerce ``x`` to a 2-D float64 array with finite entries."""
    m = np.asarray(x, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def check_square(m, name="matrix"):
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def check_vector(x, name="vector"):
    v = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def check_layout(sizes, n):
    """Validate block sizes against the matrix dimension and return offsets."""
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("block sizes must be >= 1")
    if sum(sizes) != n:
        raise ValueError(f"block sizes sum to {sum(sizes)}, expected {n}")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return sizes, offsets


def check_tolerances(rtol, atol):
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    return float(rtol), float(atol)
