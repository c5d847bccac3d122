"""Scalar quantizers built from a compander, and the vector quantize-then-normalize step."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import gl_bin_integrals, quad_sqrt
from ._validation import check_int, check_prob_vector, check_simplex_rows, check_unit_interval
from .compander import Compander
from .errors import DomainError, KLCompandError, NumericalError, ParameterError

__all__ = ["Quantizer", "centroid_table", "code_width", "pack_codes", "unpack_codes"]

MASS_FLOOR = 1e-300
# fractional parts of f(x) N this close to an integer are re-checked against the bin edges
_EDGE_SLACK = 1e-9


def centroid_table(density, edges, *, order=20, rtol=1e-12):
    """Bin masses and centroids of ``density`` over consecutive bins.

    Parameters
    ----------
    density : SingleLetterDensity
    edges : ndarray of shape (N + 1,)
        Increasing bin edges.

    Returns
    -------
    mass, centroid : ndarray of shape (N,)
        Bins with mass below ``1e-300`` get their midpoint as centroid.

    Notes
    -----
    Each bin is intersected with the density support and integrated with
    a Gauss-Legendre rule of two orders. Bins where the two disagree, or
    that contain a density breakpoint, fall back to adaptive quadrature.
    """
    edges = np.asarray(edges, dtype=float)
    lo_e, hi_e = edges[:-1], edges[1:]
    s0, s1 = density.support
    lo = np.clip(lo_e, s0, s1)
    hi = np.clip(hi_e, s0, s1)
    pdf = density.pdf

    def first(x):
        return x * pdf(x)

    m1, x1 = gl_bin_integrals([pdf, first], lo, hi, order)
    m2, x2 = gl_bin_integrals([pdf, first], lo, hi, 2 * order)
    bad = (np.abs(m1 - m2) > rtol * np.abs(m2) + 1e-300) | (np.abs(x1 - x2) > rtol * np.abs(x2) + 1e-300)
    for bp in density.breakpoints:
        bad |= (lo < bp) & (bp < hi)
    mass, mom = m2.copy(), x2.copy()
    for i in np.flatnonzero(bad & (hi > lo)):
        pts = [p for p in density.breakpoints if lo[i] < p < hi[i]]
        try:
            mass[i] = quad_sqrt(lambda t: float(pdf(t)), lo[i], hi[i], points=pts, epsabs=0.0, what=f"mass of bin {i + 1}")
            mom[i] = quad_sqrt(lambda t: t * float(pdf(t)), lo[i], hi[i], points=pts, epsabs=0.0, what=f"centroid of bin {i + 1}")
        except NumericalError as exc:
            raise NumericalError(f"bin {i + 1} ({lo_e[i]!r}, {hi_e[i]!r}]: {exc}") from None
    mid = 0.5 * (lo_e + hi_e)
    ok = mass >= MASS_FLOOR
    centroid = np.where(ok, mom / np.where(ok, mass, 1.0), mid)
    # rounding can push a centroid a hair outside a narrow bin
    centroid = np.clip(centroid, lo_e, hi_e)
    return np.where(ok, mass, 0.0), centroid


@dataclass(frozen=True)
class Quantizer:
    """Compander plus granularity plus decoding rule.

    Parameters
    ----------
    compander : Compander
    N : int
        Number of levels for nonzero inputs.
    decode_mode : {"midpoint", "centroid"}
    density : SingleLetterDensity, optional
        Required for centroid decoding.
    zero_bin : bool
        If true, exact zeros get the reserved code 0 and decode to 0.

    Examples
    --------
    >>> from klcompand.compander import PowerCompander
    >>> q = Quantizer(PowerCompander(0.5), 4)
    >>> q.encode(0.3), q.decode(4)
    (3, 0.78125)
    """

    compander: Compander
    N: int
    decode_mode: str = "midpoint"
    density: object = None
    zero_bin: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not isinstance(self.compander, Compander):
            raise ParameterError("compander must be a Compander instance")
        object.__setattr__(self, "N", check_int(self.N, "N", 1))
        if self.decode_mode not in ("midpoint", "centroid"):
            raise ParameterError(f"decode_mode must be 'midpoint' or 'centroid', got {self.decode_mode!r}")
        if self.decode_mode == "centroid" and self.density is None:
            raise ParameterError("centroid decoding needs a density")

    @property
    def bits(self):
        """``log2 N``, the reported bit width (the zero bin is not counted)."""
        return math.log2(self.N)

    @property
    def label(self):
        return f"{self.compander.family}/{self.decode_mode}"

    # -- bins ---------------------------------------------------------------

    def edges(self):
        """All ``N + 1`` bin edges ``f^-1(n / N)``; cached."""
        e = self._cache.get("edges")
        if e is None:
            if self.N > 2**26:
                raise ParameterError("edge table too large; use bin_interval for individual codes")
            e = np.asarray(self.compander.inverse(np.arange(self.N + 1) / self.N), dtype=float)
            e[0], e[-1] = 0.0, 1.0
            self._cache["edges"] = e
        return e

    def _edge(self, k):
        k = np.asarray(k)
        if self.N <= 2**20:
            return self.edges()[k]
        return np.asarray(self.compander.inverse(k / self.N), dtype=float)

    def bin_interval(self, n):
        """Return the half-open bin ``(lo, hi]`` of code ``n`` in ``1..N``."""
        n = check_int(n, "n")
        if not 1 <= n <= self.N:
            raise DomainError(f"code {n} outside 1..{self.N}")
        return float(self._edge(n - 1)), float(self._edge(n))

    # -- coding -------------------------------------------------------------

    def encode(self, x):
        """Code(s) of ``x``: 0 for exact zeros, else ``ceil(f(x) N)`` clamped to ``1..N``.

        Inputs whose scaled value lies within rounding of an integer are
        reassigned so that ``x`` lies in ``bin_interval(code)``.
        """
        arr = check_unit_interval(x)
        t = np.asarray(self.compander.forward(arr), dtype=float) * self.N
        n = np.clip(np.ceil(t), 1, self.N).astype(np.int64)
        frac = t - np.floor(t)
        slack = min(0.5, _EDGE_SLACK * self.N)
        near = ((frac <= slack) | (frac >= 1.0 - slack)) & (arr > 0)
        if np.any(near):
            idx = np.flatnonzero(near)
            xs = arr.reshape(-1)[idx]
            ns = n.reshape(-1)[idx]
            for _ in range(4):
                hi = self._edge(ns)
                lo = self._edge(ns - 1)
                up = (xs > hi) & (ns < self.N)
                down = (xs <= lo) & (ns > 1)
                if not (up.any() or down.any()):
                    break
                ns = ns + up - down
            n.reshape(-1)[idx] = ns
        if self.zero_bin:
            n = np.where(arr == 0.0, 0, n)
        return int(n) if n.ndim == 0 else n

    def decode(self, n):
        """Reconstruction value(s) for code(s) ``n``."""
        codes = np.asarray(n)
        if not np.issubdtype(codes.dtype, np.integer):
            if np.any(codes != np.round(codes)):
                raise DomainError("codes must be integers")
            codes = codes.astype(np.int64)
        lo_code = 0 if self.zero_bin else 1
        if np.any(codes < lo_code) or np.any(codes > self.N):
            raise DomainError(f"codes must lie in {lo_code}..{self.N}")
        safe = np.maximum(codes, 1)
        if self.decode_mode == "midpoint":
            y = 0.5 * (self._edge(safe - 1) + self._edge(safe))
        else:
            y = self.centroids()[safe - 1]
        y = np.where(codes == 0, 0.0, y)
        return float(y) if y.ndim == 0 else y

    def centroids(self):
        """Centroid table for codes ``1..N`` under the attached density; cached."""
        c = self._cache.get("centroids")
        if c is None:
            if self.density is None:
                raise ParameterError("no density attached")
            _, c = centroid_table(self.density, self.edges())
            self._cache["centroids"] = c
        return c

    def quantize(self, x):
        """Quantize one probability vector or a batch of rows, then renormalize.

        Returns
        -------
        codes : ndarray of int
        z : ndarray
            Normalized reconstruction ``y_raw / sum(y_raw)``.
        y_raw : ndarray
            Decoded values before normalization.
        """
        arr = np.asarray(x, dtype=float)
        arr = check_prob_vector(arr) if arr.ndim == 1 else check_simplex_rows(arr)
        codes = self.encode(arr)
        y = self.decode(codes)
        total = y.sum(axis=-1, keepdims=True)
        if np.any(total <= 0):
            raise KLCompandError("all-zero reconstruction; the compander is broken")
        return codes, y / total, y


def quantize_vector(q, x):
    """Functional form of :meth:`Quantizer.quantize` for one vector."""
    return q.quantize(check_prob_vector(x))


def code_width(N):
    """Bits per stored code: ``ceil(log2(N + 1))`` so the zero code fits."""
    N = check_int(N, "N", 1)
    return int(N).bit_length()


def pack_codes(codes, N):
    """Pack codes into little-endian fixed-width bit fields.

    Code ``i`` occupies bits ``i*w .. (i+1)*w - 1`` of the stream with
    ``w = code_width(N)``; bit 0 is the least significant bit of byte 0.
    """
    codes = np.asarray(codes, dtype=np.uint64).reshape(-1)
    w = code_width(N)
    if codes.size and int(codes.max()) > N:
        raise DomainError(f"code exceeds N={N}")
    bits = ((codes[:, None] >> np.arange(w, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def unpack_codes(data, N, count):
    """Inverse of :func:`pack_codes`."""
    w = code_width(N)
    count = check_int(count, "count", 0)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if bits.size < count * w:
        raise DomainError("not enough packed data for the requested count")
    bits = bits[: count * w].reshape(count, w).astype(np.uint64)
    return (bits << np.arange(w, dtype=np.uint64)[None, :]).sum(axis=1).astype(np.int64)
