"""Method tags used by the experiment runner and CLI, mapped to quantizers."""

from __future__ import annotations

import math

from ._validation import check_int
from .compander import build_compander
from .errors import ParameterError
from .floatfmt import BFLOAT16, MINIFLOAT8
from .priors import dirichlet_marginal
from .quantizer import Quantizer

__all__ = ["METHODS", "make_quantizer"]

METHODS = (
    "truncation",
    "approx_minimax",
    "minimax",
    "power",
    "float",
    "beta",
    "l2sq_simplex",
    "l1_simplex",
)

_FLOATS = {8: MINIFLOAT8, 16: BFLOAT16}


def make_quantizer(method, K, bits, *, decode="midpoint", density=None, **params):
    """Quantizer for a method tag at alphabet size ``K`` and width ``bits``.

    Parameters
    ----------
    method : str
        One of :data:`METHODS`. ``float`` picks minifloat8 at 8 bits and
        bfloat16 at 16 bits; ``power`` defaults to ``s = 1/log K``.
    K, bits : int
    decode : {"midpoint", "centroid"}
    density : SingleLetterDensity, optional
        Centroid decoding density; defaults to the ``Beta(1, K-1)``
        marginal of the uniform simplex prior.
    **params
        Passed to :func:`build_compander`.

    Returns
    -------
    Quantizer or FloatFormat
    """
    K = check_int(K, "K", 2)
    bits = check_int(bits, "bits", 1)
    if bits > 32:
        raise ParameterError("bits must lie in 1..32")
    if method == "float":
        if bits not in _FLOATS:
            raise ParameterError(f"float baseline exists only for 8 and 16 bits, not {bits}")
        if decode != "midpoint":
            raise ParameterError("float baselines decode to their own values; use midpoint")
        return _FLOATS[bits]
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if method == "power" and "s" not in params:
        params["s"] = 1.0 / math.log(K)
    kw = dict(params)
    if method != "power" and method != "truncation":
        kw.setdefault("K", K)
    f = build_compander(method, **kw)
    if decode == "centroid" and density is None:
        density = dirichlet_marginal(K, 1.0)
    return Quantizer(f, 1 << bits, decode_mode=decode, density=density if decode == "centroid" else None)
