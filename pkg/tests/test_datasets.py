import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from klcompand.compander import ArcSinhCompander
from klcompand.datasets import (
    EmpiricalDistribution,
    kmer_frequencies,
    read_count_table,
    read_distribution_csv,
    sample_uniform_simplex,
    tokenize,
    word_frequencies,
)
from klcompand.errors import EmptyDistributionError, ParameterError, ParseError
from klcompand.quantizer import Quantizer


class TestWords:
    def test_simple(self):
        assert word_frequencies("a b a").as_dict() == pytest.approx({"a": 2 / 3, "b": 1 / 3})

    def test_punctuation_and_case(self):
        assert word_frequencies("Hi, hi!").as_dict() == {"hi": 0.5, ",": 0.25, "!": 0.25}

    def test_tokens(self):
        assert tokenize("Don't stop--2day.") == ["don", "'", "t", "stop", "-", "-", "2day", "."]

    def test_empty(self):
        with pytest.raises(EmptyDistributionError):
            word_frequencies("   \n\t")

    def test_file_object_and_bytes(self):
        a = word_frequencies(io.StringIO("x y\nx\n"))
        b = word_frequencies(b"x y\nx\n")
        assert a.as_dict() == b.as_dict()

    @given(st.text(min_size=1))
    def test_sums_to_one(self, text):
        try:
            d = word_frequencies(text)
        except EmptyDistributionError:
            return
        assert d.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert d.K == len(set(tokenize(text)))

    @given(st.text(min_size=1))
    def test_deterministic(self, text):
        try:
            a, b = word_frequencies(text), word_frequencies(text)
        except EmptyDistributionError:
            return
        assert a.symbols == b.symbols
        np.testing.assert_array_equal(a.counts, b.counts)


class TestKmers:
    def test_acgt(self):
        d = kmer_frequencies(">r\nACGT\n", 2)
        assert d.K == 16
        assert d.as_dict() == pytest.approx({"AC": 1 / 3, "CG": 1 / 3, "GT": 1 / 3})
        assert int((d.counts == 0).sum()) == 13

    def test_soft_mask(self):
        assert kmer_frequencies(">r\nACgtAC\n", 2).as_dict() == {"AC": 1.0}

    def test_n_masks(self):
        with pytest.raises(EmptyDistributionError):
            kmer_frequencies(">r\nANA\n", 2)

    def test_windows_span_lines_not_records(self):
        d = kmer_frequencies(">a\nAC\nGT\n>b\nTT\n", 3)
        assert d.as_dict() == pytest.approx({"ACG": 0.5, "CGT": 0.5})

    def test_matches_naive_count(self):
        rng = np.random.default_rng(0)
        seq = "".join(rng.choice(list("ACGTNacgt"), 500))
        lines = [seq[i : i + 60] for i in range(0, len(seq), 60)]
        d = kmer_frequencies(">x\n" + "\n".join(lines) + "\n", 4)
        naive = {}
        for i in range(len(seq) - 3):
            w = seq[i : i + 4]
            if set(w) <= set("ACGT"):
                naive[w] = naive.get(w, 0) + 1
        total = sum(naive.values())
        assert d.as_dict() == pytest.approx({k: v / total for k, v in naive.items()})

    def test_empty_header(self):
        with pytest.raises(ParseError) as e:
            kmer_frequencies(">a\nACGT\n>\nACGT\n", 2)
        assert e.value.line == 3

    def test_bad_character(self):
        with pytest.raises(ParseError) as e:
            kmer_frequencies(">a\nACGT\nACXT\n", 2)
        assert e.value.line == 3

    def test_k_range(self):
        with pytest.raises(ParameterError):
            kmer_frequencies(">a\nACGT\n", 13)

    def test_zeros_reach_zero_code(self):
        d = kmer_frequencies(">r\nACGTACGTAAAC\n", 2)
        q = Quantizer(ArcSinhCompander.approx_minimax(d.K), 256)
        codes = np.asarray(q.encode(d.probabilities))
        np.testing.assert_array_equal(codes == 0, d.counts == 0)


class TestSerialization:
    def test_csv_roundtrip(self, tmp_path):
        d = word_frequencies("the cat, the hat, the bat")
        d.to_csv(tmp_path / "d.csv")
        back = read_distribution_csv(tmp_path / "d.csv")
        assert back.symbols == d.symbols
        np.testing.assert_array_equal(back.counts, d.counts)

    def test_count_table_roundtrip(self, tmp_path):
        d = EmpiricalDistribution("u", ["α", "b,c", ""], [3, 0, 5])
        d.to_count_table(tmp_path / "d.klct")
        back = read_count_table(tmp_path / "d.klct")
        assert back.symbols == d.symbols
        np.testing.assert_array_equal(back.counts, d.counts)

    def test_truncated_table(self, tmp_path):
        d = EmpiricalDistribution("u", ["a", "b"], [1, 2])
        d.to_count_table(tmp_path / "d.klct")
        raw = (tmp_path / "d.klct").read_bytes()
        (tmp_path / "t.klct").write_bytes(raw[:-3])
        with pytest.raises(ParseError):
            read_count_table(tmp_path / "t.klct")

    def test_bad_csv_header(self, tmp_path):
        (tmp_path / "x.csv").write_text("sym,n\n")
        with pytest.raises(ParseError):
            read_distribution_csv(tmp_path / "x.csv")

    def test_invalid_counts(self):
        with pytest.raises(ParameterError):
            EmpiricalDistribution("x", ["a"], [-1])
        with pytest.raises(EmptyDistributionError):
            EmpiricalDistribution("x", ["a", "b"], [0, 0])


class TestSimplexSampling:
    @given(K=st.integers(2, 50), seed=st.integers(0, 2**32 - 1))
    def test_valid(self, K, seed):
        x = sample_uniform_simplex(K, seed, 5)
        assert np.all(x >= 0)
        np.testing.assert_allclose(x.sum(axis=1), 1.0, rtol=1e-14)

    def test_mean(self):
        K, n = 10, 10**5
        x = sample_uniform_simplex(K, 0, n)
        sigma = np.sqrt((K - 1) / (K * K * (K + 1)) / n)
        assert np.all(np.abs(x.mean(axis=0) - 1 / K) <= 3 * sigma)

    def test_beta_marginal(self):
        K = 10
        x = sample_uniform_simplex(K, 1, 10**5)
        for k in range(K):
            assert stats.kstest(x[:, k], stats.beta(1, K - 1).cdf).statistic <= 0.01

    def test_single_vector(self):
        assert sample_uniform_simplex(4, 0).shape == (4,)
