"""Small numerical kernels shared by the loss and quantizer modules."""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import NumericalError

_SERIES_CUTOFF = 1e-2


def xlogx_excess(t):
    """Return ``(1 + t) * log1p(t) - t`` elementwise for ``t >= -1``.

    This is the nonnegative per-entry term of a KL divergence written
    relative to the reference value; at ``t = -1`` it equals 1.
    A power series is used near zero where the direct form cancels.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < _SERIES_CUTOFF
    ts = t[small]
    # sum_{n>=2} (-1)^n t^n / (n (n-1)); eight terms reach 1e-19 at |t| = 1e-2
    acc = np.zeros_like(ts)
    power = ts * ts
    for n in range(2, 10):
        acc += (-1) ** n * power / (n * (n - 1))
        power = power * ts
    out[small] = acc
    tl = t[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.where(tl <= -1.0, 1.0, (1.0 + tl) * np.log1p(np.maximum(tl, -1.0)) - tl)
    out[~small] = direct
    return out


def log1p_excess(s):
    """Return ``s - log1p(s)`` (nonnegative for ``s > -1``)."""
    s = float(s)
    if abs(s) < _SERIES_CUTOFF:
        acc, power = 0.0, s * s
        for n in range(2, 12):
            acc += (-1) ** n * power / n
            power *= s
        return acc
    return s - np.log1p(s)


@lru_cache(maxsize=8)
def gauss_legendre(order):
    """Nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def invert_monotone(func, y, lo=0.0, hi=1.0, iterations=200):
    """Vectorized bisection for ``inf {x in [lo, hi] : func(x) >= y}``.

    ``func`` must be nondecreasing and accept arrays.  Iteration stops
    once every bracket has collapsed to adjacent floating point numbers.
    """
    y = np.asarray(y, dtype=float)
    a = np.full(y.shape, lo, dtype=float)
    b = np.full(y.shape, hi, dtype=float)
    for _ in range(iterations):
        m = 0.5 * (a + b)
        active = (m > a) & (m < b)
        if not active.any():
            break
        above = func(m) >= y
        b = np.where(active & above, m, b)
        a = np.where(active & ~above, m, a)
    return b


def quad(func, a, b, *, epsabs=1e-14, epsrel=1e-12, limit=200, points=None, what="integral"):
    """Wrapper around :func:`scipy.integrate.quad` that raises on failure.

    Quadrature warnings about slow convergence are promoted to
    :class:`NumericalError` only when the reported error estimate exceeds
    ``max(epsabs, epsrel * |value|) * 1e3``; scipy is often pessimistic.
    """
    if b <= a:
        return 0.0
    if points is not None:
        points = [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, points=points)
    if not np.isfinite(value):
        raise NumericalError(f"{what}: non-finite quadrature result on [{a!r}, {b!r}]")
    if err > 1e3 * max(epsabs, epsrel * abs(value)) and err > 1e-10 * max(1.0, abs(value)):
        raise NumericalError(f"{what}: quadrature did not converge on [{a!r}, {b!r}] (error estimate {err:.3g})")
    return value


def quad_sqrt(func, a, b, *, points=None, **kwargs):
    """Integrate ``func`` over ``[a, b]`` after substituting ``x = t**2``.

    Removes ``x**-0.5`` endpoint singularities at zero, which plain
    adaptive quadrature handles poorly at tight tolerances.
    """
    if b <= a:
        return 0.0
    ta, tb = np.sqrt(a), np.sqrt(b)
    pts = None if points is None else [np.sqrt(p) for p in points if p > 0]
    return quad(lambda t: 2.0 * t * func(t * t), ta, tb, points=pts, **kwargs)


def gl_bin_integrals(funcs, lo, hi, order=20):
    """Integrate several functions over many intervals with Gauss-Legendre.

    Uses the substitution ``x = t**2`` on each interval so an ``x**-0.5``
    singularity at zero is integrated exactly.

    Parameters
    ----------
    funcs : sequence of callable
        Vectorized integrands of ``x``.
    lo, hi : ndarray
        Interval endpoints with ``0 <= lo <= hi``.

    Returns
    -------
    list of ndarray
        One array of integrals per function.
    """
    nodes, weights = gauss_legendre(order)
    slo, shi = np.sqrt(lo)[:, None], np.sqrt(hi)[:, None]
    t = slo + (shi - slo) * nodes[None, :]
    x = t * t
    w = 2.0 * t * (shi - slo) * weights[None, :]
    return [np.sum(np.nan_to_num(np.asarray(fn(x), dtype=float), posinf=0.0) * w, axis=1) for fn in funcs]
