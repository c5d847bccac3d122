"""Single-letter densities, the maximin constant solver, and priors over the simplex."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from ._numerics import invert_monotone, quad, quad_sqrt
from ._validation import check_int, check_positive
from .compander import asinh_sqrt
from .errors import NumericalError, ParameterError, ParseError, SolverError

__all__ = [
    "MaximinConstants",
    "solve_maximin_constants",
    "maximin_mean",
    "SingleLetterDensity",
    "MaximinDensity",
    "BetaDensity",
    "UniformDensity",
    "ScaledDensity",
    "CustomDensity",
    "maximin_density",
    "dirichlet_marginal",
    "sample_coupled",
    "sample_hard_prior",
    "uniform_bad_prior",
    "read_constants",
    "write_constants",
]

C_BRACKET = (0.2, 0.8)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# maximin constants


def maximin_mean(r):
    """Mean of the maximin density as a function of ``r = b/a``.

    ``E[X] = -1/r + sqrt(1/r + 1) * ArcSinh(sqrt(r)) / r``.
    """
    r = float(r)
    return (-1.0 + math.sqrt(1.0 / r + 1.0) * float(asinh_sqrt(r))) / r


@dataclass(frozen=True)
class MaximinConstants:
    """Constants of the maximin density ``x**-0.5 (a + b x)**-1.5``.

    Attributes
    ----------
    K : int
        Alphabet size.
    c : float
        The constant ``c_K``, with ``r = c K log K``.
    a, b : float
        Density coefficients with ``a sqrt(a + b) = 2``.
    """

    K: int
    c: float
    a: float
    b: float

    @property
    def r(self):
        return self.b / self.a

    @property
    def gamma(self):
        """``c K log K``, the argument scale of the minimax compander."""
        return self.c * self.K * math.log(self.K)

    @classmethod
    def from_c(cls, K, c):
        r = c * K * math.log(K)
        a = (4.0 / (r + 1.0)) ** (1.0 / 3.0)
        b = 4.0 / (a * a) - a
        return cls(K=K, c=c, a=a, b=b)

    def to_record(self):
        return f"K={self.K} c_K={self.c!r} a_K={self.a!r} b_K={self.b!r}"

    @classmethod
    def from_record(cls, text, line=None):
        fields = {}
        for tok in text.split():
            key, sep, val = tok.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {tok!r}", line)
            fields[key] = val
        try:
            K = int(fields["K"])
            c = float(fields["c_K"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad constants record: {exc}", line) from None
        out = cls.from_c(K, c)
        for key, attr in (("a_K", "a"), ("b_K", "b")):
            if key in fields and not math.isclose(float(fields[key]), getattr(out, attr), rel_tol=1e-12):
                raise ParseError(f"{key} inconsistent with c_K", line)
        return out


@lru_cache(maxsize=256)
def solve_maximin_constants(K):
    """Solve for ``c_K`` such that the maximin density has mean ``1/K``.

    Bisection on ``c`` over ``[0.2, 0.8]`` until the bracket collapses to
    adjacent floats (at most 200 steps). The mean is decreasing in ``c``.

    Parameters
    ----------
    K : int
        Alphabet size, at least 5. Values 5 to 24 are supported numerically
        only; the analytic bracket is proven for larger ``K``.

    Returns
    -------
    MaximinConstants

    Raises
    ------
    SolverError
        If the bracket contains no sign change.
    """
    K = check_int(K, "K", 5)
    target = 1.0 / K
    L = K * math.log(K)

    def g(c):
        return maximin_mean(c * L) - target

    lo, hi = C_BRACKET
    glo, ghi = g(lo), g(hi)
    if glo < 0 or ghi > 0:
        raise SolverError(f"c_K bracket {C_BRACKET} has no sign change at K={K}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    c = lo if abs(g(lo)) <= abs(g(hi)) else hi
    return MaximinConstants.from_c(K, c)


def write_constants(path, constants):
    """Write constants records, one per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for cst in constants:
            fh.write(cst.to_record() + "\n")


def read_constants(path):
    """Read a constants cache into a dict keyed by ``K``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cst = MaximinConstants.from_record(line, lineno)
            out[cst.K] = cst
    return out


# ---------------------------------------------------------------------------
# densities


class SingleLetterDensity:
    """Density on [0, 1] with cdf, inverse cdf and mean.

    Subclasses implement ``pdf``, ``cdf``, ``ppf`` on arrays and set
    ``support`` and ``mean``. ``breakpoints`` lists interior points that
    quadrature should split at.
    """

    family = "abstract"
    support = (0.0, 1.0)
    mean = None

    @property
    def breakpoints(self):
        return []

    def sample(self, rng, size=None):
        """Draw by inverse transform."""
        return self.ppf(_rng(rng).random(size))

    def partial_moment(self, lo, hi, order=0):
        """``int_lo^hi x**order p(x) dx`` by adaptive quadrature."""
        lo = max(lo, self.support[0])
        hi = min(hi, self.support[1])
        if hi <= lo:
            return 0.0
        if order == 0:
            return max(float(self.cdf(hi)) - float(self.cdf(lo)), 0.0)
        return quad_sqrt(lambda t: t**order * float(self.pdf(t)), lo, hi, points=self.breakpoints, what="moment")

    def __repr__(self):
        return f"{type(self).__name__}()"


class MaximinDensity(SingleLetterDensity):
    """``p*(x) = x**-0.5 (a + b x)**-1.5``, the hardest density with mean ``1/K``."""

    family = "maximin"

    def __init__(self, constants):
        self.constants = constants
        self.a = constants.a
        self.b = constants.b
        self.mean = 1.0 / constants.K

    @property
    def breakpoints(self):
        return [self.a / self.b]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where((x > 0) & (x <= 1), x**-0.5 * (self.a + self.b * x) ** -1.5, 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        out = 2.0 * np.sqrt(x) / (self.a * np.sqrt(self.a + self.b * x))
        out = np.minimum(out, 1.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        a = self.a
        # 4 - u^2 a^2 b rewritten with a^2 b = 4 - a^3 to avoid cancellation near u = 1
        den = 4.0 * (1.0 - u) * (1.0 + u) + u * u * a**3
        out = np.minimum(u * u * a**3 / den, 1.0)
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"MaximinDensity(K={self.constants.K})"


class BetaDensity(SingleLetterDensity):
    """Beta(alpha, beta) density backed by :mod:`scipy.stats`."""

    family = "beta"

    def __init__(self, alpha, beta):
        self.alpha = check_positive(alpha, "alpha")
        self.beta = check_positive(beta, "beta")
        self._dist = stats.beta(self.alpha, self.beta)
        self.mean = self.alpha / (self.alpha + self.beta)

    @property
    def breakpoints(self):
        m = self.mean
        return sorted({m, min(10 * m, 0.5)})

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where((x >= 0) & (x <= 1), self._dist.pdf(x), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x):
        out = self._dist.cdf(np.clip(np.asarray(x, dtype=float), 0.0, 1.0))
        return out if np.ndim(out) else float(out)

    def ppf(self, u):
        out = self._dist.ppf(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))
        return out if np.ndim(out) else float(out)

    def __repr__(self):
        return f"BetaDensity({self.alpha!r}, {self.beta!r})"


class UniformDensity(SingleLetterDensity):
    """Uniform density on ``[lo, hi]`` inside [0, 1]."""

    family = "uniform_interval"

    def __init__(self, lo=0.0, hi=1.0):
        lo, hi = float(lo), float(hi)
        if not 0.0 <= lo < hi <= 1.0:
            raise ParameterError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
        self.lo, self.hi = lo, hi
        self.support = (lo, hi)
        self.mean = 0.5 * (lo + hi)

    @property
    def breakpoints(self):
        return [v for v in (self.lo, self.hi) if 0.0 < v < 1.0]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return out if out.ndim else float(out)

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        out = self.lo + u * (self.hi - self.lo)
        return out if out.ndim else float(out)

    def partial_moment(self, lo, hi, order=0):
        lo = max(lo, self.lo)
        hi = min(hi, self.hi)
        if hi <= lo:
            return 0.0
        k = order + 1
        return (hi**k - lo**k) / (k * (self.hi - self.lo))

    def __repr__(self):
        return f"UniformDensity({self.lo!r}, {self.hi!r})"


class ScaledDensity(SingleLetterDensity):
    """Density of ``W / scale`` for ``W ~ base`` and ``scale >= 1``.

    ``ScaledDensity(maximin, 2)`` is ``2 p*(2x)``, the single-letter law
    of the hard prior.
    """

    family = "scaled"

    def __init__(self, base, scale):
        scale = check_positive(scale, "scale")
        if scale < 1.0:
            raise ParameterError("scale must be >= 1 so the support stays in [0, 1]")
        self.base = base
        self.scale = scale
        self.support = (base.support[0] / scale, base.support[1] / scale)
        self.mean = None if base.mean is None else base.mean / scale

    @property
    def breakpoints(self):
        return [p / self.scale for p in self.base.breakpoints] + [self.support[1]]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = self.scale * x
        out = np.where(xs <= 1.0, self.scale * self.base.pdf(np.minimum(xs, 1.0)), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x):
        out = self.base.cdf(np.minimum(self.scale * np.asarray(x, dtype=float), 1.0))
        return out

    def ppf(self, u):
        return np.asarray(self.base.ppf(u)) / self.scale if np.ndim(u) else float(self.base.ppf(u)) / self.scale

    def __repr__(self):
        return f"ScaledDensity({self.base!r}, {self.scale!r})"


class CustomDensity(SingleLetterDensity):
    """Density from a user pdf; cdf, inverse cdf and mean come from quadrature.

    Parameters
    ----------
    pdf : callable
        Vectorized density on [0, 1]. Must integrate to 1 within 1e-9.
    breakpoints : sequence of float, optional
        Points where the density is nonsmooth or changes scale.
    """

    family = "custom"

    def __init__(self, pdf, breakpoints=(), support=(0.0, 1.0)):
        self._pdf = pdf
        self._bp = sorted(float(b) for b in breakpoints)
        self.support = tuple(float(s) for s in support)
        total = quad(lambda t: float(pdf(t)), *self.support, points=self._bp, what="normalization")
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"density integrates to {total!r}, not 1")
        self.mean = quad(lambda t: t * float(pdf(t)), *self.support, points=self._bp, what="mean")

    @property
    def breakpoints(self):
        return list(self._bp)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= self.support[0]) & (x <= self.support[1]), self._pdf(x), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([quad(lambda t: float(self._pdf(t)), self.support[0], min(max(v, self.support[0]), self.support[1]),
                             points=self._bp, what="cdf") for v in xs])
        out = np.clip(out, 0.0, 1.0)
        return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])

    def ppf(self, u):
        ua = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.array([float(invert_monotone(lambda t: self.cdf(float(t)), v, *self.support, iterations=60)) for v in ua])
        return out.reshape(np.shape(u)) if np.ndim(u) else float(out[0])


@lru_cache(maxsize=64)
def _checked_maximin(constants):
    dens = MaximinDensity(constants)
    if __debug__:
        # the closed-form cdf is derived, not quoted; guard it with quadrature
        for x in (1e-3, 1e-2, 0.1, 0.5, 1.0):
            ref = quad_sqrt(lambda t: float(dens.pdf(t)), 0.0, x, points=dens.breakpoints, what="maximin cdf check")
            if abs(ref - dens.cdf(x)) > 1e-9:
                raise NumericalError(f"maximin cdf mismatch at x={x}: {dens.cdf(x)!r} vs {ref!r}")
    return dens


def maximin_density(constants):
    """Maximin density for solved constants (or an alphabet size)."""
    if not isinstance(constants, MaximinConstants):
        constants = solve_maximin_constants(constants)
    return _checked_maximin(constants)


def dirichlet_marginal(K, alpha=1.0):
    """Single-letter marginal ``Beta(alpha, (K - 1) alpha)`` of a symmetric Dirichlet."""
    K = check_int(K, "K", 2)
    alpha = check_positive(alpha, "alpha")
    return BetaDensity(alpha, (K - 1) * alpha)


# ---------------------------------------------------------------------------
# priors over the simplex


def sample_coupled(p, m, rng=None, size=None):
    """Draw ``m`` coupled variables, each marginally distributed as ``p``.

    A uniformly random permutation assigns each variable its own quantile
    stratum ``((j-1)/m, j/m]``; within it the uniform draw is independent.
    Exactly one variable lands in each stratum, which bounds the sum by
    ``F^-1(1) + m E[X]``.

    Parameters
    ----------
    p : SingleLetterDensity
    m : int
    rng : numpy.random.Generator or int, optional
    size : int, optional
        Number of independent draws; the result then has shape ``(size, m)``.

    Returns
    -------
    numpy.ndarray
    """
    m = check_int(m, "m", 1)
    rng = _rng(rng)
    n = 1 if size is None else check_int(size, "size", 1)
    strata = rng.permuted(np.tile(np.arange(m), (n, 1)), axis=1)
    # 1 - random() lies in (0, 1], matching the half-open strata
    u = (strata + (1.0 - rng.random((n, m)))) / m
    w = np.asarray(p.ppf(u), dtype=float)
    if not np.all(np.isfinite(w)):
        raise NumericalError("inverse cdf returned non-finite values")
    return w[0] if size is None else w


def sample_hard_prior(K, constants=None, rng=None, size=None):
    """Draw from the hard prior built on the maximin density.

    ``K - 1`` coupled maximin draws are halved, the last coordinate takes
    the remaining mass, and indices are permuted uniformly.
    """
    K = check_int(K, "K", 5)
    if constants is None:
        constants = solve_maximin_constants(K)
    rng = _rng(rng)
    n = 1 if size is None else size
    w = sample_coupled(maximin_density(constants), K - 1, rng, size=n)
    x = np.empty((n, K))
    x[:, :-1] = 0.5 * w
    x[:, -1] = np.maximum(1.0 - x[:, :-1].sum(axis=1), 0.0)
    x = rng.permuted(x, axis=1)
    return x[0] if size is None else x


def uniform_bad_prior(K, rng=None, size=None):
    """Paired prior whose single-letter marginal is uniform on ``[0, 2/K]``.

    Coordinates come in pairs ``(u, 2/K - u)``; for odd ``K`` one
    coordinate is fixed at ``1/K``. Indices are permuted uniformly.
    """
    K = check_int(K, "K", 2)
    rng = _rng(rng)
    n = 1 if size is None else size
    half = K // 2
    u = rng.uniform(0.0, 2.0 / K, (n, half))
    parts = [u, 2.0 / K - u]
    if K % 2:
        parts.append(np.full((n, 1), 1.0 / K))
    x = np.concatenate(parts, axis=1)
    x = rng.permuted(x, axis=1)
    return x[0] if size is None else x
