"""Small unsigned floating point formats used as baseline quantizers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_prob_vector, check_simplex_rows, check_unit_interval
from .errors import DomainError, KLCompandError, ParameterError

__all__ = ["FloatFormat", "MINIFLOAT8", "BFLOAT16", "float_roundtrip", "float_format"]


@dataclass(frozen=True)
class FloatFormat:
    """Unsigned binary floating point format with subnormals.

    A code ``(e << man_bits) | m`` represents ``(1 + m / 2**man_bits) * 2**(e - bias)``
    for ``e >= 1`` and ``m / 2**man_bits * 2**(1 - bias)`` for ``e == 0``.
    Every code is finite; there are no infinities or NaNs.

    Parameters
    ----------
    name : str
    exp_bits, man_bits : int
    bias : int
    saturate_low : bool
        If true, positive inputs that would round to zero return the
        smallest positive value instead, so a nonzero probability never
        becomes an exact zero.
    """

    name: str
    exp_bits: int
    man_bits: int
    bias: int
    saturate_low: bool = True

    def __post_init__(self):
        check_int(self.exp_bits, "exp_bits", 1)
        check_int(self.man_bits, "man_bits", 0)
        check_int(self.bias, "bias")

    @property
    def n_codes(self):
        return 1 << (self.exp_bits + self.man_bits)

    @property
    def bits(self):
        return self.exp_bits + self.man_bits

    @property
    def max_value(self):
        e_max = (1 << self.exp_bits) - 1
        return float(np.ldexp(2.0 - 2.0 ** -self.man_bits, e_max - self.bias))

    @property
    def min_positive(self):
        return float(np.ldexp(1.0, 1 - self.bias - self.man_bits))

    def round(self, x):
        """Round to the nearest representable value, ties to even mantissa."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError(f"{self.name} is unsigned; inputs must be >= 0")
        _, e = np.frexp(arr)
        # x = 1.f * 2**(e - 1); subnormals share the quantum of the lowest binade
        scale = np.maximum(e - 1, 1 - self.bias) - self.man_bits
        y = np.ldexp(np.rint(np.ldexp(arr, -scale)), scale)
        y = np.minimum(y, self.max_value)
        if self.saturate_low:
            y = np.where((arr > 0) & (y == 0), self.min_positive, y)
        return float(y) if y.ndim == 0 else y

    def encode(self, x):
        """Code integer of the rounded value."""
        y = np.asarray(self.round(x), dtype=float)
        _, e = np.frexp(y)
        eb = e - 1 + self.bias
        normal = (eb >= 1) & (y > 0)
        mant = np.where(
            normal,
            np.ldexp(y, -(e - 1) + self.man_bits) - (1 << self.man_bits),
            np.ldexp(y, self.bias - 1 + self.man_bits),
        )
        code = np.where(normal, eb, 0).astype(np.int64) << self.man_bits | mant.astype(np.int64)
        return int(code) if code.ndim == 0 else code

    def decode(self, code):
        """Value of code integer(s)."""
        c = np.asarray(code, dtype=np.int64)
        if np.any(c < 0) or np.any(c >= self.n_codes):
            raise DomainError(f"{self.name} codes must lie in 0..{self.n_codes - 1}")
        e = c >> self.man_bits
        m = (c & ((1 << self.man_bits) - 1)).astype(float)
        frac = np.where(e > 0, 1.0 + m / (1 << self.man_bits), m / (1 << self.man_bits))
        val = np.ldexp(frac, np.maximum(e, 1) - self.bias)
        return float(val) if val.ndim == 0 else val

    def table(self):
        """All representable values in code order."""
        return self.decode(np.arange(self.n_codes))

    def quantize(self, x):
        """Round each entry then renormalize, mirroring :meth:`Quantizer.quantize`."""
        arr = np.asarray(x, dtype=float)
        arr = check_prob_vector(arr) if arr.ndim == 1 else check_simplex_rows(arr)
        y = np.asarray(self.round(arr))
        total = y.sum(axis=-1, keepdims=True)
        if np.any(total <= 0):
            raise KLCompandError("all-zero reconstruction")
        return self.encode(arr), y / total, y

    @property
    def label(self):
        return self.name


MINIFLOAT8 = FloatFormat("minifloat8", 4, 4, 15)
BFLOAT16 = FloatFormat("bfloat16", 8, 7, 127)

_FORMATS = {"minifloat8": MINIFLOAT8, "bfloat16": BFLOAT16}


def float_format(name):
    """Look up a named format."""
    try:
        return _FORMATS[name]
    except KeyError:
        raise ParameterError(f"unknown float format {name!r}; choose from {sorted(_FORMATS)}") from None


def float_roundtrip(fmt, x):
    """Round ``x`` in [0, 1] through ``fmt`` (a FloatFormat or its name)."""
    if isinstance(fmt, str):
        fmt = float_format(fmt)
    check_unit_interval(x)
    return fmt.round(x)
