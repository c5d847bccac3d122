"""KL divergence, single-letter and asymptotic losses, and optimal companders."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from ._numerics import gl_bin_integrals, quad, quad_sqrt, xlogx_excess
from ._validation import check_int
from .compander import ArcSinhCompander, Compander, MixedCompander, TabulatedCompander, asinh_sqrt
from .errors import DomainError, InfeasibleError, NumericalError, ParameterError
from .quantizer import Quantizer, centroid_table

__all__ = [
    "LossReport",
    "LOSS_FIELDS",
    "kl_divergence",
    "raw_divergence",
    "phi_divergence",
    "single_letter_loss",
    "single_letter_loss_mc",
    "expected_loss_mc",
    "asymptotic_loss",
    "optimal_compander",
    "OptimalCompander",
    "minimax_saddle_loss",
    "convergence_probe",
    "alt_loss",
    "approx_vs_minimax_epsilon",
    "power_sup_loss",
    "arcsinh_loss_closed_form",
]

LN2 = math.log(2.0)
LOSS_FIELDS = ("method", "K", "N", "b", "nats", "bits_per_entry", "raw_loss", "trials", "stderr")


# ---------------------------------------------------------------------------
# divergences


def _divergence_terms(x, z):
    """Per-entry ``x log(x/z)`` in the nonnegative form ``z phi(x/z - 1) + (x - z)``.

    Returns the phi part, the linear part, and a mask of infinite entries.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DomainError(f"shape mismatch: {x.shape} vs {z.shape}")
    infinite = (x > 0) & (z <= 0)
    pos = z > 0
    zs = np.where(pos, z, 1.0)
    with np.errstate(over="ignore"):
        t = np.where(pos, x / zs - 1.0, 0.0)
    # for x >> z the log form is exact enough and avoids overflow in x/z
    big = t > 1e8
    ts = np.where(big, 0.0, t)
    xs = np.where(big, x, 1.0)
    direct = xs * (np.log(xs) - np.log(zs)) - xs + zs
    phi = np.where(pos, np.where(big, direct, zs * xlogx_excess(ts)), 0.0)
    lin = np.where(pos, x - z, 0.0)
    return phi, lin, infinite


def kl_divergence(x, z, axis=-1):
    """KL divergence ``sum_i x_i log(x_i / z_i)`` in nats.

    Terms with ``x_i = 0`` contribute zero. If some ``x_i > 0`` has
    ``z_i = 0`` the result is ``inf``. Works row-wise on 2-d input.

    Examples
    --------
    >>> round(kl_divergence([1.0, 0.0], [0.5, 0.5]), 12)
    0.693147180560
    """
    phi, lin, infinite = _divergence_terms(x, z)
    d = phi.sum(axis=axis) + lin.sum(axis=axis)
    d = np.maximum(d, 0.0)
    d = np.where(infinite.any(axis=axis), np.inf, d)
    return float(d) if np.ndim(d) == 0 else d


def raw_divergence(x, y, axis=-1):
    """``sum_i x_i log(x_i / y_i)`` for an unnormalized reconstruction ``y``.

    Unlike :func:`kl_divergence` this can be negative.
    """
    phi, lin, infinite = _divergence_terms(x, y)
    d = phi.sum(axis=axis) + lin.sum(axis=axis)
    d = np.where(infinite.any(axis=axis), np.inf, d)
    return float(d) if np.ndim(d) == 0 else d


def phi_divergence(x, y, axis=-1):
    """``sum_i [x_i log(x_i / y_i) - x_i + y_i]``, the nonnegative form of :func:`raw_divergence`.

    Under centroid decoding the linear part has mean zero, so both have
    the same expectation; this form has smaller variance.
    """
    phi, _, infinite = _divergence_terms(x, y)
    d = phi.sum(axis=axis)
    d = np.where(infinite.any(axis=axis), np.inf, d)
    return float(d) if np.ndim(d) == 0 else d


def alt_loss(metric, x, z):
    """Squared Euclidean (``"L2sq"``) or absolute (``"L1"``) distance."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DomainError(f"length mismatch: {x.shape} vs {z.shape}")
    key = metric.lower()
    if key in ("l2sq", "l2^2", "l22"):
        return float(np.sum((x - z) ** 2))
    if key in ("l1", "tv"):
        return float(np.sum(np.abs(x - z)))
    raise ParameterError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class LossReport:
    """Monte-Carlo loss summary for one method and granularity.

    ``nats`` is the mean KL divergence per vector and ``bits_per_entry``
    is ``nats / (K ln 2)``. ``raw_loss`` is the mean divergence against
    the unnormalized reconstruction. ``infinite`` counts trials with an
    infinite divergence; they are excluded from the means.
    """

    method: str
    K: int
    N: int
    b: float
    nats: float
    bits_per_entry: float
    raw_loss: float
    trials: int
    stderr: float
    infinite: int = 0
    raw_stderr: float = 0.0

    @property
    def kl_bits(self):
        """Mean KL divergence per vector in bits."""
        return self.nats / LN2

    def row(self):
        d = asdict(self)
        return [d[k] for k in LOSS_FIELDS]

    def to_csv(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(LOSS_FIELDS)
        w.writerow([_fmt(v) for v in self.row()])
        return buf.getvalue()

    @classmethod
    def from_row(cls, row):
        """Build from a CSV row dict, checking the bits column."""
        rep = cls(
            method=row["method"],
            K=int(row["K"]),
            N=int(row["N"]),
            b=float(row["b"]),
            nats=float(row["nats"]),
            bits_per_entry=float(row["bits_per_entry"]),
            raw_loss=float(row["raw_loss"]),
            trials=int(row["trials"]),
            stderr=float(row["stderr"]),
        )
        expect = rep.nats / (rep.K * LN2)
        if not math.isclose(rep.bits_per_entry, expect, rel_tol=1e-12, abs_tol=1e-300):
            raise DomainError(f"bits_per_entry {rep.bits_per_entry!r} inconsistent with nats {rep.nats!r}")
        return rep


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def expected_loss_mc(sampler, q, trials, rng=None, *, K=None, method=None, chunk=None, N=None):
    """Monte-Carlo expected KL loss of a quantizer under a prior.

    Parameters
    ----------
    sampler : callable
        ``sampler(rng, size)`` returning an array of shape ``(size, K)``.
    q : Quantizer or FloatFormat
        Anything with ``quantize(rows) -> (codes, z, y_raw)``.
    trials : int
    rng : numpy.random.Generator or int, optional
    chunk : int, optional
        Rows drawn per batch; defaults to about 2e6 entries per batch.
    N : int, optional
        Level count to report; defaults to ``q.N`` or ``2**q.bits``.

    Returns
    -------
    LossReport
    """
    trials = check_int(trials, "trials", 1)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    kl_all, raw_all = [], []
    done = 0
    while done < trials:
        size = min(trials - done, chunk or 8)
        rows = np.atleast_2d(np.asarray(sampler(rng, size), dtype=float))
        if K is None:
            K = rows.shape[-1]
        if chunk is None:
            chunk = max(1, 2_000_000 // K)
        _, z, y = q.quantize(rows)
        kl_all.append(np.atleast_1d(kl_divergence(rows, z)))
        raw_all.append(np.atleast_1d(raw_divergence(rows, y)))
        done += rows.shape[0]
    kl = np.concatenate(kl_all)
    raw = np.concatenate(raw_all)
    finite = np.isfinite(kl)
    n_ok = int(finite.sum())
    n = len(kl)
    nats = float(kl[finite].mean()) if n_ok else math.inf
    se = float(kl[finite].std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else 0.0
    rf = np.isfinite(raw)
    raw_mean = float(raw[rf].mean()) if rf.any() else math.inf
    raw_se = float(raw[rf].std(ddof=1) / math.sqrt(rf.sum())) if rf.sum() > 1 else 0.0
    if N is None:
        N = getattr(q, "N", None) or 1 << q.bits
    return LossReport(
        method=method or q.label,
        K=int(K),
        N=int(N),
        b=float(math.log2(N)),
        nats=nats,
        bits_per_entry=nats / (K * LN2),
        raw_loss=raw_mean,
        trials=n,
        stderr=se,
        infinite=n - n_ok,
        raw_stderr=raw_se,
    )


# ---------------------------------------------------------------------------
# single-letter losses


def _bin_phi_integrals(p, lo, hi, ybar, order=20, rtol=1e-10):
    """``int_lo^hi p(x) phi(x/ybar - 1) dx`` per bin, GL with adaptive fallback."""
    yb = ybar[:, None]

    def integrand(x):
        return p.pdf(x) * xlogx_excess(x / yb - 1.0)

    (a,) = gl_bin_integrals([integrand], lo, hi, order)
    (b,) = gl_bin_integrals([integrand], lo, hi, 2 * order)
    bad = np.abs(a - b) > rtol * np.abs(b) + 1e-300
    for bp in p.breakpoints:
        bad |= (lo < bp) & (bp < hi)
    out = b.copy()
    for i in np.flatnonzero(bad & (hi > lo)):
        y0 = float(ybar[i])
        pts = [bp for bp in p.breakpoints if lo[i] < bp < hi[i]] + [y0]
        try:
            out[i] = quad_sqrt(
                lambda t: float(p.pdf(t)) * float(xlogx_excess(t / y0 - 1.0)),
                lo[i], hi[i], points=pts, epsabs=0.0, epsrel=1e-12, what=f"loss in bin {i + 1}",
            )
        except NumericalError as exc:
            raise NumericalError(f"single-letter loss, bin {i + 1} ({lo[i]!r}, {hi[i]!r}]: {exc}") from None
    return out


def single_letter_loss(p, f, N, *, order=20):
    """Single-letter loss ``E[X log(X / ybar(X))]`` with centroid decoding.

    Each bin contributes ``ybar int p(x) phi((x - ybar)/ybar) dx`` where
    ``phi(t) = (1 + t) log(1 + t) - t``; the linear remainder integrates to
    zero at the centroid, and this form is insensitive to small centroid
    errors.

    Parameters
    ----------
    p : SingleLetterDensity
    f : Compander
    N : int

    Returns
    -------
    float
        Loss in nats.
    """
    N = check_int(N, "N", 1)
    q = Quantizer(f, N, "centroid", p)
    edges = q.edges()
    mass, ybar = centroid_table(p, edges, order=order)
    s0, s1 = p.support
    lo = np.clip(edges[:-1], s0, s1)
    hi = np.clip(edges[1:], s0, s1)
    keep = mass > 0
    if not keep.any():
        return 0.0
    terms = _bin_phi_integrals(p, lo[keep], hi[keep], ybar[keep], order)
    return float(np.sum(ybar[keep] * terms))


def single_letter_loss_mc(p, f, N, samples, rng=None):
    """Monte-Carlo single-letter loss with exact centroids.

    Averages ``ybar phi(X/ybar - 1)`` over draws of ``X`` from ``p``.
    The dropped linear term has zero mean within every bin.

    Returns
    -------
    mean, stderr : float
    """
    N = check_int(N, "N", 1)
    samples = check_int(samples, "samples", 2)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    q = Quantizer(f, N, "centroid", p)
    x = np.asarray(p.sample(rng, samples), dtype=float)
    codes = q.encode(x)
    ybar = q.decode(codes)
    pos = ybar > 0
    vals = np.where(pos, ybar * xlogx_excess(np.where(pos, x / np.where(pos, ybar, 1.0) - 1.0, 0.0)), 0.0)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def convergence_probe(p, f, Ns):
    """``N**2 * single_letter_loss(p, f, N)`` for each ``N``."""
    Ns = [check_int(n, "N", 1) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ParameterError("N list must be strictly ascending")
    return [n * n * single_letter_loss(p, f, n) for n in Ns]


# ---------------------------------------------------------------------------
# asymptotic loss


_T_MAX = 690.0  # x = exp(-690) ~ 1e-300


def _log_segments(p):
    """Integration segments in ``t = -log x`` over the density support."""
    s0, s1 = p.support
    t_lo = -math.log(s1) if s1 < 1.0 else 0.0
    t_hi = -math.log(s0) if s0 > 0.0 else _T_MAX
    cuts = {t_lo, t_hi}
    t = 1.0
    while t < t_hi:
        if t > t_lo:
            cuts.add(t)
        t *= 2.0
    for bp in p.breakpoints:
        if 0.0 < bp < 1.0:
            tb = -math.log(bp)
            if t_lo < tb < t_hi:
                cuts.add(tb)
                for d in (-2.0, 2.0):
                    if t_lo < tb + d < t_hi:
                        cuts.add(tb + d)
    return sorted(cuts)


def _integrate_log(func, p, what):
    """``int func(x) dx`` over the support using ``x = exp(-t)``.

    Returns ``inf`` when the contribution below ``x = 1e-150`` is not
    negligible, which signals an integral diverging at zero.
    """
    cuts = _log_segments(p)
    total = 0.0
    tail = 0.0
    for a, b in zip(cuts, cuts[1:]):
        val = quad(lambda t: func(math.exp(-t)) * math.exp(-t), a, b, epsabs=0.0, epsrel=1e-12, limit=400, what=what)
        total += val
        if a >= _T_MAX / 2:
            tail += val
    if not math.isfinite(total):
        return math.inf
    if p.support[0] == 0.0 and tail > 1e-9 * max(total - tail, 1e-300):
        return math.inf
    return total


def asymptotic_loss(p, f):
    """Asymptotic loss ``L(p, f) = (1/24) int p(x) f'(x)**-2 x**-1 dx``.

    Returns ``math.inf`` if the integral diverges at zero.
    """

    def integrand(x):
        px = float(p.pdf(x))
        if px == 0.0:
            return 0.0
        d = float(f.derivative(x))
        if d <= 0.0:
            return math.inf
        return px / d / d / x

    with np.errstate(over="ignore", divide="ignore"):
        val = _integrate_log(integrand, p, "asymptotic loss")
    return val / 24.0


def power_sup_loss(s, K):
    """``(1/24) s**-2 K**(2s - 1)``, the worst asymptotic loss of ``x**s`` over mean-``1/K`` densities."""
    return K ** (2.0 * s - 1.0) / (24.0 * s * s)


def minimax_saddle_loss(constants):
    """Closed-form saddle value ``(1/24) (2 ArcSinh(sqrt(r)) / sqrt(b))**3``."""
    phi1 = 2.0 * float(asinh_sqrt(constants.r)) / math.sqrt(constants.b)
    return phi1**3 / 24.0


def approx_vs_minimax_epsilon(constants):
    """``max(2c - 1, 1/(2c) - 1)``: the relative penalty for using ``c = 1/2``."""
    c = constants.c
    return max(2.0 * c - 1.0, 1.0 / (2.0 * c) - 1.0)


# ---------------------------------------------------------------------------
# optimal compander


@dataclass(frozen=True)
class OptimalCompander:
    """Optimal compander for a density together with its asymptotic loss."""

    compander: Compander
    loss: float
    normalizer: float

    def __iter__(self):
        yield self.compander
        yield self.loss

    def repaired(self, delta):
        """Mixed variant ``(1 - delta) f + delta sqrt(x)``, which carries a certificate."""
        return MixedCompander(self.compander, delta)


def optimal_compander(p, *, per_decade=40, x_min=1e-16, tol=1e-10, max_rounds=8):
    """Optimal compander ``f_p`` with ``f_p' ~ (p(x)/x)**(1/3)`` and its loss.

    The cumulative integral is tabulated on a log-spaced grid, refined
    until interpolating at every segment midpoint agrees with direct
    integration to relative ``tol``, and interpolated monotonically in
    log-log space.

    Returns
    -------
    OptimalCompander
        Unpacks as ``(compander, loss)`` with ``loss = (1/24) Z**3`` and
        ``Z = int (p(x)/x)**(1/3) dx``.

    Raises
    ------
    InfeasibleError
        If ``Z`` diverges.
    ParameterError
        If ``p`` vanishes near 0, so ``f_p`` has no log-log tabulation.
    """
    s0, s1 = p.support
    if s0 > 0.0:
        raise ParameterError("density vanishes near 0; the optimal compander is not invertible")

    def h(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.cbrt(np.asarray(p.pdf(x), dtype=float)) / np.cbrt(x)

    Z = _integrate_log(lambda x: float(h(x)), p, "optimal compander normalizer")
    if not math.isfinite(Z):
        raise InfeasibleError("normalizing integral of (p/x)^(1/3) diverges")

    grid = np.logspace(math.log10(x_min), 0.0, int(per_decade * -math.log10(x_min)) + 1)
    extra = [bp for bp in p.breakpoints if x_min < bp < 1.0]
    if s1 < 1.0:
        extra.append(s1)
    grid = np.unique(np.concatenate([grid, extra]))
    grid[-1] = 1.0

    head = quad_sqrt(lambda t: float(h(t)), 0.0, grid[0], epsabs=0.0, epsrel=1e-13, what="optimal compander head")

    def seg_integrals(lo, hi):
        (a,) = gl_bin_integrals([h], lo, hi, 20)
        (b,) = gl_bin_integrals([h], lo, hi, 40)
        bad = np.abs(a - b) > 1e-13 * np.abs(b)
        for i in np.flatnonzero(bad):
            b[i] = quad_sqrt(lambda t: float(h(t)), lo[i], hi[i], epsabs=0.0, epsrel=1e-13, what="optimal compander")
        return b

    for _ in range(max_rounds):
        seg = seg_integrals(grid[:-1], grid[1:])
        cum = head + np.concatenate([[0.0], np.cumsum(seg)])
        y = cum / cum[-1]
        comp = TabulatedCompander(grid, y, h(grid) / cum[-1])
        mid = np.sqrt(grid[:-1] * grid[1:])
        exact = (cum[:-1] + seg_integrals(grid[:-1], mid)) / cum[-1]
        err = np.abs(np.asarray(comp.forward(mid)) - exact) / exact
        worst = err > tol
        if not worst.any():
            break
        grid = np.unique(np.concatenate([grid, mid[worst]]))
    norm = float(cum[-1])
    if not math.isclose(norm, Z, rel_tol=1e-8):
        raise NumericalError(f"optimal compander normalizer mismatch: {norm!r} vs {Z!r}")
    return OptimalCompander(comp, Z**3 / 24.0, Z)


def minimax_compander_loss(constants, p=None):
    """``L(p, f*)`` in closed form; the same value for every mean-``1/K`` density."""
    return minimax_saddle_loss(constants)


def arcsinh_loss_closed_form(f, mean):
    """``L(p, f)`` for an ArcSinh compander and any density with the given mean.

    ``f'(x)**-2 x**-1 = (4 A**2 / gamma) (1 + gamma x)`` is affine in ``x``,
    so the loss only depends on the mean.
    """
    if not isinstance(f, ArcSinhCompander):
        raise ParameterError("closed form applies to ArcSinh companders only")
    A = float(asinh_sqrt(f.gamma))
    return (4.0 * A * A / f.gamma) * (1.0 + f.gamma * mean) / 24.0
