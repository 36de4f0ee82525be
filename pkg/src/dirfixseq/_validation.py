"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_probability(value, name: str, *, open_left: bool = True, open_right: bool = True):
    """Return ``value`` as float/ndarray, raising ``ValueError`` if outside the interval."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    low_bad = arr <= 0.0 if open_left else arr < 0.0
    high_bad = arr >= 1.0 if open_right else arr > 1.0
    if np.any(low_bad | high_bad):
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value!r}")
    return float(arr) if arr.ndim == 0 else arr


def check_alpha(alpha) -> float:
    return check_probability(alpha, "alpha")


def check_rho(rho, *, allow_one: bool = True) -> float:
    rho = float(rho)
    upper_ok = rho <= 1.0 if allow_one else rho < 1.0
    if not (0.0 <= rho and upper_ok):
        interval = "[0, 1]" if allow_one else "[0, 1)"
        raise ValueError(f"rho must lie in {interval}, got {rho!r}")
    return rho


def check_batteries(X, name: str = "X") -> tuple[np.ndarray, bool]:
    """Coerce statistics or p-values to a 2-d float array (rows are batteries).

    Returns the array and whether the input was 1-d.
    """
    arr = np.asarray(X, dtype=float)
    was_1d = arr.ndim == 1
    if was_1d:
        arr = arr[None, :]
    arr = check_array(arr, ensure_2d=True, dtype=float, input_name=name)
    if arr.shape[1] < 1:
        raise ValueError(f"{name} must contain at least one hypothesis")
    return arr, was_1d
