"""scikit-learn style wrapper: fit a compander quantizer to the alphabet size, transform rows."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_simplex_rows
from .errors import ParameterError
from .losses import kl_divergence
from .methods import make_quantizer

__all__ = ["CompanderQuantizer"]


class CompanderQuantizer(TransformerMixin, BaseEstimator):
    """Quantize rows of probability vectors with a compander and renormalize.

    Parameters
    ----------
    method : str
        Method tag, see :func:`klcompand.methods.make_quantizer`.
    bits : int
        ``N = 2**bits`` levels per entry, plus the zero code.
    decode : {"midpoint", "centroid"}
        Centroid decoding uses the marginal of a uniform simplex prior.
    s : float, optional
        Exponent for ``method="power"``; defaults to ``1/log K``.

    Attributes
    ----------
    n_features_in_ : int
        The alphabet size ``K`` seen in :meth:`fit`.
    quantizer_ : Quantizer or FloatFormat

    Examples
    --------
    >>> est = CompanderQuantizer(bits=4).fit(np.full((1, 8), 0.125))
    >>> est.transform([[0.5, 0.5, 0, 0, 0, 0, 0, 0]]).sum()
    1.0
    """

    def __init__(self, method="approx_minimax", bits=8, decode="midpoint", s=None):
        self.method = method
        self.bits = bits
        self.decode = decode
        self.s = s

    def fit(self, X, y=None):
        X = check_simplex_rows(np.atleast_2d(np.asarray(X, dtype=float)))
        K = X.shape[1]
        if K < 2:
            raise ParameterError("need at least two columns")
        bits = check_int(self.bits, "bits", 1)
        if bits > 32:
            raise ParameterError("bits must lie in 1..32")
        if self.decode not in ("midpoint", "centroid"):
            raise ParameterError(f"decode must be 'midpoint' or 'centroid', got {self.decode!r}")
        extra = {} if self.s is None else {"s": self.s}
        self.quantizer_ = make_quantizer(self.method, K, bits, decode=self.decode, **extra)
        self.n_features_in_ = K
        return self

    def _rows(self, X):
        check_is_fitted(self, "quantizer_")
        X = check_simplex_rows(np.atleast_2d(np.asarray(X, dtype=float)))
        if X.shape[1] != self.n_features_in_:
            raise ParameterError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X

    def encode(self, X):
        """Integer codes, one per entry."""
        X = self._rows(X)
        return np.atleast_2d(self.quantizer_.encode(X))

    def decode_codes(self, codes):
        """Normalized reconstructions from codes."""
        check_is_fitted(self, "quantizer_")
        y = np.atleast_2d(self.quantizer_.decode(np.asarray(codes)))
        return y / y.sum(axis=1, keepdims=True)

    def transform(self, X):
        """Normalized reconstructions ``z`` of each row."""
        X = self._rows(X)
        _, z, _ = self.quantizer_.quantize(X)
        return np.atleast_2d(z)

    def score(self, X, y=None):
        """Negative mean KL divergence in nats, so larger is better."""
        X = self._rows(X)
        return -float(np.mean(kl_divergence(X, self.transform(X))))

    def _more_tags(self):
        return {"requires_positive_X": True, "stateless": False}
