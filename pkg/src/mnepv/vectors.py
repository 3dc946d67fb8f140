"""Unit-vector helpers: normalization, canonical phase, angles.

Eigenvectors are only defined up to a unit scalar.  Everywhere in this
package a single canonical representative is used: the entry of largest
modulus is rotated to be real and nonnegative (ties broken by lowest
index).  This keeps iterate histories, reports and tests deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError

__all__ = ["phase_normalize", "normalize_unit", "vec_angle", "check_dim"]


def phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-modulus entry is real and nonnegative."""
    v = np.asarray(v)
    j = int(np.argmax(np.abs(v)))
    pivot = v[j]
    if pivot == 0:
        return v.copy()
    if np.iscomplexobj(v):
        return v * (np.conj(pivot) / abs(pivot))
    return v if pivot > 0 else -v


def normalize_unit(v: np.ndarray) -> np.ndarray:
    """Scale to unit 2-norm and canonical phase."""
    v = np.asarray(v, dtype=np.complex128 if np.iscomplexobj(v) else np.float64)
    nrm = np.linalg.norm(v)
    if nrm == 0 or not np.isfinite(nrm):
        raise ValueError("cannot normalize a zero or non-finite vector")
    return phase_normalize(v / nrm)


def vec_angle(x: np.ndarray, y: np.ndarray) -> float:
    """Angle between the lines spanned by unit vectors x and y.

    Computed from the sine, which stays accurate down to ~1e-15 where the
    cosine formula saturates.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    check_dim(x, y.shape[0])
    s = np.linalg.norm(y - x * np.vdot(x, y))
    return float(np.arcsin(min(1.0, s)))


def check_dim(v: np.ndarray, n: int) -> None:
    if v.ndim != 1 or v.shape[0] != n:
        raise DimensionMismatchError(
            f"expected a vector of length {n}, got shape {v.shape}"
        )
