"""Argument checks shared across the package.

Each helper returns the validated value (converted to float or ndarray) or
raises ``ValueError`` naming the offending argument.
"""

from __future__ import annotations

import numpy as np


def check_positive(value, name: str, strict: bool = True) -> float:
    v = float(value)
    ok = v > 0 if strict else v >= 0
    if not (np.isfinite(v) and ok):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value!r}")
    return v


def check_range(value, name: str, lo: float, hi: float, closed=(True, True)) -> float:
    v = float(value)
    lo_ok = v >= lo if closed[0] else v > lo
    hi_ok = v <= hi if closed[1] else v < hi
    if not (lo_ok and hi_ok):
        lb, rb = "[" if closed[0] else "(", "]" if closed[1] else ")"
        raise ValueError(f"{name} must lie in {lb}{lo}, {hi}{rb}, got {value!r}")
    return v


def check_vector(value, name: str, ndim_last: int = 3) -> np.ndarray:
    """Finite array whose last axis has length ``ndim_last``."""
    a = np.asarray(value, dtype=float)
    if a.ndim == 0 or a.shape[-1] != ndim_last:
        raise ValueError(f"{name} must have trailing dimension {ndim_last}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


def check_unit(value, name: str, tol: float = 1e-9) -> np.ndarray:
    a = check_vector(value, name)
    if abs(np.linalg.norm(a) - 1.0) > tol:
        raise ValueError(f"{name} must be a unit vector (|v| = {np.linalg.norm(a):.3g})")
    return a


def check_ascending(values, name: str, strict: bool = True) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    d = np.diff(a)
    if np.any(d <= 0 if strict else d < 0):
        raise ValueError(f"{name} must be {'strictly ' if strict else ''}ascending")
    return a


def check_uniform_grid(t, name: str = "t", rtol: float = 1e-9) -> float:
    """Return the step of a uniform ascending grid."""
    t = check_ascending(t, name)
    if t.size < 2:
        raise ValueError(f"{name} needs at least two samples")
    dt = np.diff(t)
    step = (t[-1] - t[0]) / (t.size - 1)
    if np.max(np.abs(dt - step)) > rtol * step + 4 * np.finfo(float).eps * np.max(np.abs(t)):
        raise ValueError(f"{name} must be uniformly sampled")
    return float(step)
