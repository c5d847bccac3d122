import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from klcompand.errors import DomainError, ParameterError
from klcompand.floatfmt import BFLOAT16, MINIFLOAT8, FloatFormat, float_format, float_roundtrip


def bfloat16_reference(x32):
    """Round float32 values to bfloat16 by the usual bit trick: add 0x7FFF plus the kept LSB, then truncate."""
    bits = np.asarray(x32, dtype=np.float32).view(np.uint32).astype(np.uint64)
    lsb = (bits >> 16) & 1
    out = ((bits + 0x7FFF + lsb) & 0xFFFF0000).astype(np.uint32)
    return out.view(np.float32).astype(np.float64)


class TestMinifloat:
    def test_layout(self):
        assert MINIFLOAT8.n_codes == 256
        assert MINIFLOAT8.max_value == pytest.approx(1.9375)
        assert MINIFLOAT8.min_positive == 2.0**-18

    def test_table_is_monotone(self):
        t = MINIFLOAT8.table()
        assert t[0] == 0.0
        assert np.all(np.diff(t) > 0)

    def test_one_is_representable(self):
        assert MINIFLOAT8.round(1.0) == 1.0

    def test_every_code_roundtrips(self):
        codes = np.arange(MINIFLOAT8.n_codes)
        assert np.array_equal(MINIFLOAT8.encode(MINIFLOAT8.decode(codes)), codes)

    @given(x=st.floats(min_value=0.0, max_value=1.0))
    def test_rounds_to_nearest(self, x):
        t = MINIFLOAT8.table()
        y = MINIFLOAT8.round(x)
        best = np.min(np.abs(t - x))
        if x >= MINIFLOAT8.min_positive / 2 or x == 0:
            assert abs(y - x) == pytest.approx(best, abs=1e-300)
        assert y in t

    def test_ties_to_even(self):
        # 1 + 1/32 sits halfway between 1 and 1 + 1/16; the even mantissa is 1
        assert MINIFLOAT8.round(1 + 1 / 32) == 1.0
        assert MINIFLOAT8.round(1 + 3 / 32) == 1 + 2 / 16

    def test_tiny_positive_saturates_to_min(self):
        assert MINIFLOAT8.round(1e-12) == MINIFLOAT8.min_positive
        flush = FloatFormat("flush", 4, 4, 15, saturate_low=False)
        assert flush.round(1e-12) == 0.0


class TestBfloat16:
    @given(x=st.floats(min_value=2.0**-100, max_value=1.0, width=32))
    def test_matches_bit_trick(self, x):
        assert BFLOAT16.round(x) == bfloat16_reference(x)

    def test_array(self, rng):
        x = rng.random(1000).astype(np.float32)
        np.testing.assert_array_equal(BFLOAT16.round(x.astype(float)), bfloat16_reference(x))


class TestRoundtrip:
    @pytest.mark.parametrize("fmt", [MINIFLOAT8, BFLOAT16], ids=lambda f: f.name)
    @given(x=st.floats(min_value=0.0, max_value=1.0))
    def test_idempotent(self, fmt, x):
        y = float_roundtrip(fmt, x)
        assert float_roundtrip(fmt, y) == y

    @pytest.mark.parametrize("fmt", [MINIFLOAT8, BFLOAT16], ids=lambda f: f.name)
    @given(a=st.floats(min_value=0.0, max_value=1.0), b=st.floats(min_value=0.0, max_value=1.0))
    def test_monotone(self, fmt, a, b):
        lo, hi = min(a, b), max(a, b)
        assert fmt.round(lo) <= fmt.round(hi)

    def test_named_lookup(self):
        assert float_roundtrip("bfloat16", 0.1) == BFLOAT16.round(0.1)
        with pytest.raises(ParameterError):
            float_format("fp8")

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            float_roundtrip(MINIFLOAT8, 1.5)
        with pytest.raises(DomainError):
            MINIFLOAT8.round(-1.0)

    def test_vector_quantize_normalizes(self):
        x = np.array([0.5, 0.3, 0.2, 0.0])
        codes, z, y = MINIFLOAT8.quantize(x)
        assert z.sum() == pytest.approx(1.0)
        assert codes[3] == 0 and z[3] == 0.0
