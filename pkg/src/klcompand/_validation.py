"""Input validation helpers."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import DomainError, ParameterError

SUM_TOL = 1e-9


def check_int(value, name, minimum=None):
    """Return ``value`` as ``int`` after checking it is integral and bounded below."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, numbers.Real) and float(value).is_integer():
            value = int(value)
        else:
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_positive(value, name):
    """Return ``value`` as a finite positive float."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be finite and > 0, got {value}")
    return value


def check_unit_interval(x, name="x"):
    """Return ``x`` as a float array after checking ``0 <= x <= 1``."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def check_prob_vector(x, name="x", tol=SUM_TOL):
    """Validate a probability vector.

    Parameters
    ----------
    x : array_like
        One-dimensional array of nonnegative entries.
    tol : float
        Allowed absolute deviation of the sum from 1.

    Returns
    -------
    numpy.ndarray
        ``x`` as a float64 array.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError(f"{name} entries must be finite and nonnegative")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise DomainError(f"{name} must sum to 1 (got {total!r})")
    return arr


def check_simplex_rows(X, name="X", tol=SUM_TOL):
    """Validate a 2-d array whose rows are probability vectors."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise DomainError(f"{name} must be a 2-d array of probability vectors")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError(f"{name} entries must be finite and nonnegative")
    dev = np.abs(arr.sum(axis=1) - 1.0)
    if np.any(dev > tol):
        raise DomainError(f"rows of {name} must sum to 1 (max deviation {dev.max():.3g})")
    return arr
