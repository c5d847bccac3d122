import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from klcompand.datasets import sample_uniform_simplex
from klcompand.errors import DomainError, ParameterError
from klcompand.estimator import CompanderQuantizer
from klcompand.losses import kl_divergence
from klcompand.methods import METHODS, make_quantizer


@pytest.fixture
def X():
    return sample_uniform_simplex(32, 0, 50)


class TestParams:
    def test_get_set(self):
        est = CompanderQuantizer(method="power", bits=6, s=0.3)
        assert est.get_params() == {"method": "power", "bits": 6, "decode": "midpoint", "s": 0.3}
        est.set_params(bits=10)
        assert est.bits == 10

    def test_clone_is_unfitted(self, X):
        est = CompanderQuantizer().fit(X)
        c = clone(est)
        assert c.get_params() == est.get_params()
        assert not hasattr(c, "quantizer_")

    def test_not_fitted(self, X):
        with pytest.raises(NotFittedError):
            CompanderQuantizer().transform(X)

    @pytest.mark.parametrize("kw", [{"bits": 0}, {"bits": 33}, {"decode": "mean"}, {"method": "nope"}])
    def test_bad_params_fail_in_fit(self, X, kw):
        est = CompanderQuantizer(**kw)
        with pytest.raises(ParameterError):
            est.fit(X)


class TestTransform:
    @pytest.mark.parametrize("method", [m for m in METHODS if m != "float"])
    def test_rows_normalized(self, X, method):
        Z = CompanderQuantizer(method=method, bits=8).fit(X).transform(X)
        assert Z.shape == X.shape
        np.testing.assert_allclose(Z.sum(axis=1), 1.0, rtol=1e-12)

    def test_matches_quantizer(self, X):
        est = CompanderQuantizer(bits=6).fit(X)
        _, z, _ = make_quantizer("approx_minimax", 32, 6).quantize(X)
        np.testing.assert_array_equal(est.transform(X), z)

    def test_codes_roundtrip(self, X):
        est = CompanderQuantizer(bits=6).fit(X)
        codes = est.encode(X)
        assert codes.dtype.kind in "iu" and codes.max() <= 64
        np.testing.assert_allclose(est.decode_codes(codes), est.transform(X), rtol=1e-12)

    def test_score(self, X):
        est = CompanderQuantizer(bits=8).fit(X)
        assert est.score(X) == pytest.approx(-np.mean(kl_divergence(X, est.transform(X))))
        assert CompanderQuantizer(bits=12).fit(X).score(X) > est.score(X)

    def test_column_mismatch(self, X):
        est = CompanderQuantizer().fit(X)
        with pytest.raises(ParameterError):
            est.transform(X[:, :10] / X[:, :10].sum(axis=1, keepdims=True))

    def test_rejects_non_simplex(self, X):
        with pytest.raises(DomainError):
            CompanderQuantizer().fit(X * 2)

    def test_float_baseline(self, X):
        Z = CompanderQuantizer(method="float", bits=16).fit(X).transform(X)
        np.testing.assert_allclose(Z.sum(axis=1), 1.0, rtol=1e-12)

    def test_pipeline(self, X):
        pipe = make_pipeline(CompanderQuantizer(bits=4))
        np.testing.assert_array_equal(pipe.fit_transform(X), CompanderQuantizer(bits=4).fit(X).transform(X))

    def test_docstring_example(self):
        est = CompanderQuantizer(bits=4).fit(np.full((1, 8), 0.125))
        assert est.transform([[0.5, 0.5, 0, 0, 0, 0, 0, 0]]).sum() == 1.0
