"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionMismatch, ValidationError


def check_points(X, *, n_features: int | None = None, min_samples: int = 1, allow_nan: bool = False) -> np.ndarray:
    """Coerce ``X`` to a finite float ``(T, N)`` array."""
    try:
        X = check_array(
            X, dtype=np.float64, ensure_2d=True,
            ensure_all_finite="allow-nan" if allow_nan else True,
            ensure_min_samples=min_samples,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionMismatch("wrong number of features", got=X.shape[1], expected=n_features)
    return X


def check_times(times, n: int) -> np.ndarray:
    if times is None:
        return np.arange(n, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.shape != (n,):
        raise DimensionMismatch("times must have one entry per sample", got=list(times.shape), expected=n)
    return times


def check_box(lo, hi, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if lo.shape != (dim,) or hi.shape != (dim,):
        raise DimensionMismatch("box corners have the wrong dimension", expected=dim)
    if np.any(hi <= lo):
        raise ValidationError("box upper corner must exceed lower corner", lo=lo.tolist(), hi=hi.tolist())
    return lo, hi
