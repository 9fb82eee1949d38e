"""Small argument checks shared across modules."""
from __future__ import annotations

import numpy as np


def check_epsilon(epsilon, *, closed: bool = False, allow_zero: bool = False, name: str = "epsilon") -> float:
    """Return ``epsilon`` as float after checking it lies in (0, 1).

    ``closed`` admits both endpoints; ``allow_zero`` admits 0 only.
    """
    epsilon = float(epsilon)
    lo_ok = epsilon >= 0.0 if (closed or allow_zero) else epsilon > 0.0
    hi_ok = epsilon <= 1.0 if closed else epsilon < 1.0
    if not (lo_ok and hi_ok):
        lo = "[0" if (closed or allow_zero) else "(0"
        hi = "1]" if closed else "1)"
        raise ValueError(f"{name} must lie in {lo}, {hi}, got {epsilon}")
    return epsilon


def check_degree(d) -> int:
    if isinstance(d, bool) or int(d) != d or d < 2:
        raise ValueError(f"degree must be an integer >= 2, got {d}")
    return int(d)


def check_vector(x, n: int | None = None, *, name: str = "x", dtype=None) -> np.ndarray:
    """1-D finite array, optionally of length ``n``."""
    x = np.asarray(x, dtype=dtype)
    if x.dtype.kind not in "fciub":
        raise TypeError(f"{name} must be numeric")
    if x.dtype.kind in "iub":
        x = x.astype(float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def check_square(A, *, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def check_nonnegative(value, name: str) -> float:
    value = float(value)
    if not value >= 0.0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value
