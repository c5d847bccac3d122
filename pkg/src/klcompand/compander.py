"""Companders: monotone maps of [0, 1] onto itself applied before uniform quantization.

Every compander exposes ``forward`` (f), ``inverse`` (f^-1), and ``derivative``
(f'). All three accept scalars or arrays. Companders are immutable.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy import interpolate, optimize, special

from ._numerics import invert_monotone
from ._validation import check_int, check_positive
from .errors import NumericalError, ParameterError, SolverError

__all__ = [
    "Compander",
    "IdentityCompander",
    "PowerCompander",
    "ArcSinhCompander",
    "BetaCompander",
    "L2SimplexCompander",
    "L1SimplexCompander",
    "TabulatedCompander",
    "MixedCompander",
    "CallableCompander",
    "build_compander",
    "compander_from_record",
    "asinh_sqrt",
    "solve_l1_gamma",
]


def _out(arr, like):
    """Return a Python float when the caller passed a scalar."""
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def asinh_sqrt(w):
    """``ArcSinh(sqrt(w))`` through ``log(sqrt(w) + sqrt(w + 1))``.

    The logarithm is written as ``log1p(sqrt(w) + w / (sqrt(w + 1) + 1))``
    so that small ``w`` keeps full relative precision.
    """
    w = np.asarray(w, dtype=float)
    r = np.sqrt(w)
    return np.log1p(r + w / (np.sqrt(w + 1.0) + 1.0))


class Compander:
    """Base class.

    Subclasses implement ``_f``, ``_finv`` and ``_fprime`` on float arrays.
    ``family`` is a short tag and ``params`` a dict of the defining
    parameters, which together form the text record.
    """

    family = "abstract"
    strictly_monotone = True

    @property
    def params(self):
        return {}

    def forward(self, x):
        """Evaluate f, clipped to [0, 1]."""
        arr = np.asarray(x, dtype=float)
        y = np.clip(self._f(arr), 0.0, 1.0)
        y = np.where(arr >= 1.0, 1.0, np.where(arr <= 0.0, 0.0, y))
        return _out(y, x)

    def inverse(self, y):
        """Evaluate the preimage map f^-1, clipped to [0, 1]."""
        arr = np.asarray(y, dtype=float)
        x = np.clip(self._finv(arr), 0.0, 1.0)
        x = np.where(arr >= 1.0, 1.0, np.where(arr <= 0.0, 0.0, x))
        return _out(x, y)

    def derivative(self, x):
        """Evaluate f' on (0, 1]."""
        arr = np.asarray(x, dtype=float)
        return _out(self._fprime(arr), x)

    __call__ = forward

    def certificate(self):
        """Return ``(c, alpha)`` such that ``f(x) - c x**alpha`` is nondecreasing.

        ``None`` means no certificate is known for this family.
        """
        return None

    def dominating_constant(self):
        """``(1/24) c**-2 alpha**-2`` from the certificate, or ``None``."""
        cert = self.certificate()
        if cert is None:
            return None
        c, alpha = cert
        return 1.0 / (24.0 * c * c * alpha * alpha)

    def to_record(self):
        """Serialize as a one-line JSON text record."""
        rec = {"family": self.family}
        rec.update(self.params)
        return json.dumps(rec, sort_keys=True)

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items() if not isinstance(v, list))
        return f"{type(self).__name__}({inner})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_record() == other.to_record()

    def __hash__(self):
        return hash(self.to_record())

    def _fprime(self, x):
        h = 1e-6 * np.maximum(x, 1e-6)
        lo = np.maximum(x - h, 0.0)
        hi = np.minimum(x + h, 1.0)
        return (self._f(hi) - self._f(lo)) / (hi - lo)

    def _finv(self, y):
        x = invert_monotone(self._f, y)
        return x


class IdentityCompander(Compander):
    """f(x) = x, i.e. plain uniform quantization ("truncation")."""

    family = "identity"

    def _f(self, x):
        return x

    def _finv(self, y):
        return y

    def _fprime(self, x):
        return np.ones_like(x)


class PowerCompander(Compander):
    """f(x) = x**s for ``0 < s <= 1``.

    Parameters
    ----------
    s : float
        Exponent. Values above 1/2 are accepted, but such companders have
        no certificate and asymptotic guarantees do not apply to them.
    """

    family = "power"

    def __init__(self, s):
        s = check_positive(s, "s")
        if s > 1.0:
            raise ParameterError(f"s must lie in (0, 1], got {s}")
        self.s = s

    @property
    def params(self):
        return {"s": self.s}

    def _f(self, x):
        return np.power(x, self.s)

    def _finv(self, y):
        return np.power(y, 1.0 / self.s)

    def _fprime(self, x):
        with np.errstate(divide="ignore"):
            return self.s * np.power(x, self.s - 1.0)

    def certificate(self):
        if self.s <= 0.5:
            return (2.0 * self.s, 0.5)
        return None


class ArcSinhCompander(Compander):
    """f(x) = ArcSinh(sqrt(gamma x)) / ArcSinh(sqrt(gamma)).

    The minimax compander uses ``gamma = c_K K log K`` with the solved
    maximin constant; the approximate minimax compander uses ``c = 1/2``.
    Construct these through :meth:`minimax` and :meth:`approx_minimax`.
    """

    family = "arcsinh"

    def __init__(self, gamma, *, K=None, c=None, family=None):
        self.gamma = check_positive(gamma, "gamma")
        self.K = K
        self.c = c
        if family is not None:
            self.family = family
        self._A = float(asinh_sqrt(self.gamma))

    @classmethod
    def minimax(cls, K, constants=None):
        """Minimax compander for alphabet size ``K``.

        Parameters
        ----------
        K : int
            Alphabet size, at least 5.
        constants : MaximinConstants, optional
            Pre-solved constants; solved on demand otherwise.
        """
        from .priors import solve_maximin_constants

        K = check_int(K, "K", 2)
        if constants is None:
            constants = solve_maximin_constants(K)
        elif constants.K != K:
            raise ParameterError(f"constants are for K={constants.K}, not K={K}")
        c = float(constants.c)
        return cls(c * K * math.log(K), K=K, c=c, family="minimax")

    @classmethod
    def approx_minimax(cls, K):
        """Approximate minimax compander, ``c = 1/2``."""
        K = check_int(K, "K", 2)
        return cls(0.5 * K * math.log(K), K=K, c=0.5, family="approx_minimax")

    @property
    def params(self):
        if self.family == "minimax":
            return {"K": self.K, "c": self.c}
        if self.family == "approx_minimax":
            return {"K": self.K}
        return {"gamma": self.gamma}

    def _f(self, x):
        return asinh_sqrt(self.gamma * x) / self._A

    def _finv(self, y):
        return np.sinh(y * self._A) ** 2 / self.gamma

    def _fprime(self, x):
        g = self.gamma
        with np.errstate(divide="ignore"):
            return math.sqrt(g) / (2.0 * self._A * np.sqrt(x) * np.sqrt(1.0 + g * x))

    def certificate(self):
        g = self.gamma
        return (math.sqrt(g) / (self._A * math.sqrt(1.0 + g)), 0.5)


class BetaCompander(Compander):
    """Optimal compander for the Beta(alpha, (K-1) alpha) single-letter density.

    f(x) = I_x((alpha + 1)/3, ((K - 1) alpha + 2)/3), the regularized
    incomplete beta function.
    """

    family = "beta"

    def __init__(self, K, alpha):
        self.K = check_int(K, "K", 2)
        self.alpha = check_positive(alpha, "alpha")
        self.a = (self.alpha + 1.0) / 3.0
        self.b = ((self.K - 1) * self.alpha + 2.0) / 3.0
        self._logB = special.betaln(self.a, self.b)

    @property
    def params(self):
        return {"K": self.K, "alpha": self.alpha}

    def _f(self, x):
        return special.betainc(self.a, self.b, x)

    def _finv(self, y):
        x = special.betaincinv(self.a, self.b, y)
        bad = ~np.isfinite(x)
        if np.any(bad):
            raise NumericalError(
                f"beta compander inverse failed for a={self.a}, b={self.b} at y={np.asarray(y)[bad][:3]}"
            )
        return x

    def _fprime(self, x):
        with np.errstate(divide="ignore"):
            logp = (self.a - 1.0) * np.log(x) + (self.b - 1.0) * np.log1p(-x) - self._logB
        return np.exp(logp)


class L2SimplexCompander(Compander):
    """f(x) = (sqrt(1 + K (K - 2) x) - 1) / (K - 2), minimax for squared error on the simplex."""

    family = "l2sq_simplex"

    def __init__(self, K):
        self.K = check_int(K, "K", 2)

    @property
    def params(self):
        return {"K": self.K}

    def _f(self, x):
        K = self.K
        return K * x / (np.sqrt(1.0 + K * (K - 2) * x) + 1.0)

    def _finv(self, y):
        K = self.K
        return y * (y * (K - 2) + 2.0) / K

    def _fprime(self, x):
        K = self.K
        return K / (2.0 * np.sqrt(1.0 + K * (K - 2) * x))


def solve_l1_gamma(K):
    """Solve for gamma_K in the absolute-error simplex compander.

    The worst-case density ``(alpha x + beta)**-2`` with unit mass and mean
    ``1/K`` gives, with ``gamma = alpha/beta``,
    ``(1 + gamma)/gamma**2 * (log(1 + gamma) - gamma/(1 + gamma)) = 1/K``.
    """
    K = check_int(K, "K", 3)

    def mean(log_g):
        g = math.exp(log_g)
        if g < 1e-3:
            # series of log1p(g) - g/(1+g) = g^2/2 - 2g^3/3 + 3g^4/4 ...
            inner = sum((-1) ** n * (n - 1) * g**n / n for n in range(2, 9))
        else:
            inner = math.log1p(g) - g / (1.0 + g)
        return (1.0 + g) / (g * g) * inner - 1.0 / K

    lo, hi = math.log(1e-8), math.log(1e300)
    if mean(lo) * mean(hi) > 0:
        raise SolverError(f"no root for gamma_K at K={K}")
    return math.exp(optimize.brentq(mean, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))


class L1SimplexCompander(Compander):
    """f(x) = log(gamma_K x + 1) / log(gamma_K + 1), minimax for absolute error on the simplex."""

    family = "l1_simplex"

    def __init__(self, K, gamma=None):
        self.K = check_int(K, "K", 3)
        self.gamma = solve_l1_gamma(self.K) if gamma is None else check_positive(gamma, "gamma")
        self._L = math.log1p(self.gamma)

    @property
    def params(self):
        return {"K": self.K, "gamma": self.gamma}

    def _f(self, x):
        return np.log1p(self.gamma * x) / self._L

    def _finv(self, y):
        return np.expm1(y * self._L) / self.gamma

    def _fprime(self, x):
        return self.gamma / ((1.0 + self.gamma * x) * self._L)


def _fritsch_carlson(x, y, m):
    """Limit Hermite slopes ``m`` so the cubic through ``(x, y)`` stays monotone."""
    m = np.array(m, dtype=float)
    delta = np.diff(y) / np.diff(x)
    for k, d in enumerate(delta):
        if d == 0.0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / d, m[k + 1] / d
        s = a * a + b * b
        if s > 9.0:
            tau = 3.0 / math.sqrt(s)
            m[k] = tau * a * d
            m[k + 1] = tau * b * d
    return m


class TabulatedCompander(Compander):
    """Compander given by samples of f, interpolated monotonically in log-log space.

    Parameters
    ----------
    x, y : array_like
        Strictly increasing grid in (0, 1] and the corresponding positive,
        nondecreasing values of f, with ``x[-1] == 1`` and ``y[-1] == 1``.
    dy : array_like, optional
        Values of f' at the grid. When given, a monotone-limited cubic
        Hermite interpolant is used; otherwise PCHIP. Below ``x[0]`` the
        compander is extended as a power law matching the first slope.
    """

    family = "tabulated"

    def __init__(self, x, y, dy=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ParameterError("x and y must be 1-d arrays of equal length >= 2")
        if np.any(x <= 0) or np.any(y <= 0) or np.any(np.diff(x) <= 0) or np.any(np.diff(y) < 0):
            raise ParameterError("tabulated compander needs positive samples, x increasing and y nondecreasing")
        if not (math.isclose(x[-1], 1.0) and math.isclose(y[-1], 1.0, rel_tol=1e-12)):
            raise ParameterError("tabulated compander must end at (1, 1)")
        x[-1] = 1.0
        y[-1] = 1.0
        self.strictly_monotone = bool(np.all(np.diff(y) > 0))
        self._x = x
        self._y = y
        self._lx = np.log(x)
        self._ly = np.log(y)
        if dy is None:
            self._dy = None
            self._interp = interpolate.PchipInterpolator(self._lx, self._ly, extrapolate=False)
        else:
            dy = np.asarray(dy, dtype=float)
            if dy.shape != x.shape or np.any(dy < 0) or not np.all(np.isfinite(dy)):
                raise ParameterError("dy must be finite, nonnegative, and match x")
            self._dy = dy
            slopes = _fritsch_carlson(self._lx, self._ly, dy * x / y)
            self._interp = interpolate.CubicHermiteSpline(self._lx, self._ly, slopes, extrapolate=False)
        self._dinterp = self._interp.derivative()
        self._slope0 = float(self._dinterp(self._lx[0]))
        if self._slope0 <= 0:
            raise ParameterError("tabulated compander must have a positive slope at the first node")

    @property
    def params(self):
        out = {"x": self._x.tolist(), "y": self._y.tolist()}
        if self._dy is not None:
            out["dy"] = self._dy.tolist()
        return out

    def _logf(self, lx):
        lx = np.minimum(lx, 0.0)
        out = np.empty_like(lx)
        below = lx < self._lx[0]
        out[below] = self._ly[0] + self._slope0 * (lx[below] - self._lx[0])
        out[~below] = self._interp(lx[~below])
        return out

    def _f(self, x):
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(x, 1e-320))
        y = np.exp(self._logf(np.atleast_1d(lx)))
        y = np.where(np.atleast_1d(x) <= 0, 0.0, y)
        return y.reshape(np.shape(x))

    def _fprime(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            lx = np.log(xa)
        slope = np.where(lx < self._lx[0], self._slope0, self._dinterp(np.clip(lx, self._lx[0], 0.0)))
        fx = np.exp(self._logf(lx))
        return (slope * fx / xa).reshape(np.shape(x))

    def _finv(self, y):
        ya = np.atleast_1d(np.asarray(y, dtype=float))
        with np.errstate(divide="ignore"):
            ly = np.log(ya)
        # bisection in log x, then Newton polish
        lo = min(self._lx[0] + (np.min(ly[np.isfinite(ly)], initial=0.0) - self._ly[0]) / self._slope0, self._lx[0]) - 1.0
        lx = invert_monotone(self._logf, np.where(np.isfinite(ly), ly, 0.0), lo=lo, hi=0.0, iterations=120)
        for _ in range(3):
            resid = self._logf(lx) - ly
            slope = np.where(lx < self._lx[0], self._slope0, self._dinterp(np.clip(lx, self._lx[0], 0.0)))
            step = np.where(np.isfinite(resid) & (slope > 0), resid / np.where(slope > 0, slope, 1.0), 0.0)
            lx = np.minimum(lx - step, 0.0)
        x = np.exp(lx)
        x = np.where(ya <= 0, 0.0, x)
        return x.reshape(np.shape(y))


class MixedCompander(Compander):
    """f_delta(x) = (1 - delta) f(x) + delta sqrt(x).

    Mixing in a square root repairs a compander that lacks a certificate
    at a cost in asymptotic loss that vanishes as delta goes to 0.
    """

    family = "mixed"

    def __init__(self, base, delta):
        if not isinstance(base, Compander):
            raise ParameterError("base must be a Compander")
        delta = float(delta)
        if not 0.0 < delta <= 1.0:
            raise ParameterError(f"delta must lie in (0, 1], got {delta}")
        self.base = base
        self.delta = delta

    @property
    def params(self):
        return {"base": json.loads(self.base.to_record()), "delta": self.delta}

    def _f(self, x):
        return (1.0 - self.delta) * self.base._f(x) + self.delta * np.sqrt(x)

    def _fprime(self, x):
        with np.errstate(divide="ignore"):
            return (1.0 - self.delta) * self.base._fprime(x) + 0.5 * self.delta / np.sqrt(x)

    def _finv(self, y):
        x = invert_monotone(self._f, y, iterations=1100)
        return x

    def certificate(self):
        base = self.base.certificate()
        c = self.delta
        if base is not None and base[1] == 0.5:
            c += (1.0 - self.delta) * base[0]
        return (c, 0.5)


class CallableCompander(Compander):
    """Compander from user callables.

    ``f`` must be nondecreasing with ``f(0) = 0`` and ``f(1) = 1``. Missing
    inverses use bisection and missing derivatives use a central difference
    with relative step ``1e-6 max(x, 1e-6)``. Not serializable.
    """

    family = "custom"

    def __init__(self, f, finv=None, fprime=None, *, strictly_monotone=True):
        self._fn = f
        self._finv_fn = finv
        self._fprime_fn = fprime
        self.strictly_monotone = strictly_monotone
        if abs(float(f(0.0))) > 1e-12 or abs(float(f(1.0)) - 1.0) > 1e-12:
            raise ParameterError("custom compander must satisfy f(0) = 0 and f(1) = 1")

    def _f(self, x):
        return np.asarray(self._fn(x), dtype=float)

    def _finv(self, y):
        if self._finv_fn is not None:
            return np.asarray(self._finv_fn(y), dtype=float)
        return invert_monotone(self._f, y, iterations=1100)

    def _fprime(self, x):
        if self._fprime_fn is not None:
            return np.asarray(self._fprime_fn(x), dtype=float)
        return super()._fprime(x)

    def to_record(self):
        raise ParameterError("custom callable companders cannot be serialized")


_ALIASES = {
    "truncation": "identity",
    "uniform": "identity",
    "l2sq": "l2sq_simplex",
    "l1": "l1_simplex",
}


def build_compander(spec, **kwargs):
    """Build a compander from a family tag and parameters.

    Parameters
    ----------
    spec : str or dict
        Family tag (``identity``, ``power``, ``minimax``, ``approx_minimax``,
        ``beta``, ``l2sq_simplex``, ``l1_simplex``, ``arcsinh``,
        ``tabulated``, ``mixed``) or a dict with a ``family`` key.
    **kwargs
        Family parameters, merged over those in ``spec``.

    Returns
    -------
    Compander

    Examples
    --------
    >>> f = build_compander("power", s=0.5)
    >>> f.inverse(0.5)
    0.25
    """
    if isinstance(spec, dict):
        params = dict(spec)
        family = params.pop("family", None)
    else:
        family, params = spec, {}
    params.update(kwargs)
    if not isinstance(family, str):
        raise ParameterError(f"unknown compander family {family!r}")
    family = _ALIASES.get(family.lower(), family.lower())
    try:
        if family == "identity":
            return IdentityCompander()
        if family == "power":
            if "s" not in params and "K" in params:
                return PowerCompander(1.0 / math.log(params["K"]))
            return PowerCompander(params["s"])
        if family == "minimax":
            K = params["K"]
            if "c" in params:
                c = float(params["c"])
                K = check_int(K, "K", 2)
                return ArcSinhCompander(c * K * math.log(K), K=K, c=c, family="minimax")
            return ArcSinhCompander.minimax(K, params.get("constants"))
        if family == "approx_minimax":
            return ArcSinhCompander.approx_minimax(params["K"])
        if family == "arcsinh":
            return ArcSinhCompander(params["gamma"])
        if family == "beta":
            return BetaCompander(params["K"], params.get("alpha", 1.0))
        if family == "l2sq_simplex":
            return L2SimplexCompander(params["K"])
        if family == "l1_simplex":
            return L1SimplexCompander(params["K"], params.get("gamma"))
        if family == "tabulated":
            return TabulatedCompander(params["x"], params["y"], params.get("dy"))
        if family == "mixed":
            base = params["base"]
            if not isinstance(base, Compander):
                base = build_compander(base)
            return MixedCompander(base, params["delta"])
    except KeyError as exc:
        raise ParameterError(f"missing parameter {exc.args[0]!r} for family {family!r}") from None
    raise ParameterError(f"unknown compander family {family!r}")


def compander_from_record(text):
    """Inverse of :meth:`Compander.to_record`."""
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"malformed compander record: {exc}") from None
    if not isinstance(rec, dict):
        raise ParameterError("compander record must be a JSON object")
    return build_compander(rec)
