import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, special

from klcompand.compander import (
    ArcSinhCompander,
    BetaCompander,
    IdentityCompander,
    L2SimplexCompander,
    PowerCompander,
)
from klcompand.datasets import sample_uniform_simplex
from klcompand.errors import DomainError, ParameterError
from klcompand.losses import (
    LOSS_FIELDS,
    LossReport,
    alt_loss,
    approx_vs_minimax_epsilon,
    arcsinh_loss_closed_form,
    asymptotic_loss,
    convergence_probe,
    expected_loss_mc,
    kl_divergence,
    minimax_saddle_loss,
    optimal_compander,
    phi_divergence,
    power_sup_loss,
    raw_divergence,
    single_letter_loss,
    single_letter_loss_mc,
)
from klcompand.priors import (
    BetaDensity,
    ScaledDensity,
    UniformDensity,
    dirichlet_marginal,
    maximin_density,
    solve_maximin_constants,
)
from klcompand.quantizer import Quantizer


def simplex(K):
    return arrays(np.float64, K, elements=st.floats(min_value=0.0, max_value=1.0)).filter(lambda v: v.sum() > 0).map(
        lambda v: v / v.sum()
    )


class TestDivergence:
    def test_worked_example(self):
        expect = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expect, rel=1e-14)

    def test_point_mass(self):
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), rel=1e-15)

    def test_infinite_signal(self):
        assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf

    @given(x=simplex(7))
    def test_self_divergence_zero(self, x):
        assert kl_divergence(x, x) == 0.0

    @given(x=simplex(5), z=simplex(5))
    def test_nonnegative_and_zero_only_at_equality(self, x, z):
        d = kl_divergence(x, z)
        assert d >= 0
        if np.max(np.abs(x - z)) > 1e-3 and np.isfinite(d):
            assert d > 0

    def test_rows(self):
        x = np.array([[0.5, 0.5], [1.0, 0.0]])
        z = np.array([[0.25, 0.75], [0.5, 0.5]])
        np.testing.assert_allclose(kl_divergence(x, z), [kl_divergence(x[0], z[0]), math.log(2)])

    def test_tiny_differences_keep_precision(self):
        # naive sum x log(x/z) cancels catastrophically here
        x = np.array([0.5, 0.5])
        z = np.array([0.5 + 1e-9, 0.5 - 1e-9])
        assert kl_divergence(x, z) == pytest.approx(2e-18, rel=1e-6)

    def test_subnormal_reconstruction(self):
        x = np.full(5, 0.2)
        z = np.array([1.0 - 4 * 2.2e-313] + [2.2e-313] * 4)
        ref = 0.2 * math.log(0.2) + 0.8 * (math.log(0.2) - math.log(2.2e-313))
        assert kl_divergence(x, z) == pytest.approx(ref, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            kl_divergence([0.5, 0.5], [1.0])

    def test_phi_form(self):
        x = np.array([0.2, 0.3, 0.5])
        y = np.array([0.25, 0.25, 0.45])
        assert phi_divergence(x, y) == pytest.approx(raw_divergence(x, y) + y.sum() - 1.0, rel=1e-12)


class TestAltLoss:
    def test_identical(self):
        x = np.array([0.1, 0.9])
        assert alt_loss("L1", x, x) == 0.0
        assert alt_loss("L2sq", x, x) == 0.0

    def test_two_terms(self):
        assert alt_loss("L1", [1, 0], [0.5, 0.5]) == pytest.approx(1.0)
        assert alt_loss("L2sq", [1, 0], [0.5, 0.5]) == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            alt_loss("L1", [1.0], [0.5, 0.5])

    def test_l2_simplex_compander_scaling(self):
        # the bound is for a uniform error within each bin, so it holds on average over points
        K, N = 10, 2**12
        q = Quantizer(L2SimplexCompander(K), N)
        x = sample_uniform_simplex(K, np.random.default_rng(0), 4000)
        _, _, y = q.quantize(x)
        vals = N * N * ((x - y) ** 2).sum(axis=1)
        assert vals.mean() + 3 * vals.std() / math.sqrt(len(vals)) <= 1 / 3


class TestLossReport:
    def test_csv_roundtrip(self):
        rep = LossReport("power", 100, 256, 8.0, 0.01, 0.01 / (100 * math.log(2)), 0.02, 10, 1e-3)
        text = rep.to_csv()
        header, row = text.strip().split("\n")
        assert header.split(",") == list(LOSS_FIELDS)
        back = LossReport.from_row(dict(zip(LOSS_FIELDS, row.split(","))))
        assert back.row() == rep.row()

    def test_inconsistent_bits_rejected(self):
        row = dict(zip(LOSS_FIELDS, ["power", "100", "256", "8.0", "0.01", "0.5", "0", "10", "0"]))
        with pytest.raises(DomainError):
            LossReport.from_row(row)


class TestExpectedLoss:
    def test_deterministic(self):
        q = Quantizer(ArcSinhCompander.approx_minimax(50), 256)
        sampler = lambda g, n: sample_uniform_simplex(50, g, n)
        a = expected_loss_mc(sampler, q, 300, 7)
        b = expected_loss_mc(sampler, q, 300, 7)
        assert a == b
        assert a.nats >= 0 and a.stderr >= 0
        assert a.bits_per_entry == pytest.approx(a.nats / (50 * math.log(2)), rel=1e-12)

    def test_perfect_quantizer(self):
        q = Quantizer(PowerCompander(0.5), 2**32)
        rep = expected_loss_mc(lambda g, n: sample_uniform_simplex(10, g, n), q, 200, 0)
        assert rep.nats <= 1e-12

    def test_infinite_events_counted(self):
        class Lossy:
            N = 4
            label = "lossy"

            def quantize(self, rows):
                z = np.zeros_like(rows)
                z[:, 0] = 1.0
                return None, z, z

        rep = expected_loss_mc(lambda g, n: sample_uniform_simplex(3, g, n), Lossy(), 20, 0)
        assert rep.infinite == 20
        assert rep.nats == math.inf

    def test_normalization_helps_with_centroids(self):
        # averaged over the prior, normalized KL never exceeds K times the single-letter loss
        K, N = 20, 64
        p = dirichlet_marginal(K)
        f = ArcSinhCompander.approx_minimax(K)
        q = Quantizer(f, N, "centroid", p)
        rep = expected_loss_mc(lambda g, n: sample_uniform_simplex(K, g, n), q, 20_000, 3)
        assert rep.nats <= K * single_letter_loss(p, f, N) + 3 * rep.stderr


class TestSingleLetter:
    def test_uniform_identity_two_levels(self):
        ref = integrate.quad(lambda x: x * math.log(4 * x), 0, 0.5)[0] + integrate.quad(
            lambda x: x * math.log(4 * x / 3), 0.5, 1
        )[0]
        assert single_letter_loss(UniformDensity(), IdentityCompander(), 2) == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize(
        "p,f,N",
        [
            (dirichlet_marginal(100), PowerCompander(1 / math.log(100)), 64),
            (maximin_density(100), ArcSinhCompander.minimax(100), 32),
            (UniformDensity(0, 0.02), ArcSinhCompander.approx_minimax(100), 128),
        ],
        ids=["beta-power", "maximin-minimax", "uniform-approx"],
    )
    def test_matches_monte_carlo(self, p, f, N):
        exact = single_letter_loss(p, f, N)
        mc, se = single_letter_loss_mc(p, f, N, 200_000, 11)
        assert exact >= 0
        assert abs(mc - exact) <= 4 * se

    def test_convergence_increasing_for_divergent_limit(self):
        vals = convergence_probe(UniformDensity(), IdentityCompander(), [2**4, 2**6, 2**8, 2**10])
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert asymptotic_loss(UniformDensity(), IdentityCompander()) == math.inf

    @pytest.mark.parametrize(
        "p,f",
        [
            (dirichlet_marginal(100), ArcSinhCompander.approx_minimax(100)),
            (maximin_density(100), ArcSinhCompander.minimax(100)),
            (UniformDensity(0, 0.02), PowerCompander(0.5)),
        ],
        ids=["beta-approx", "maximin-minimax", "uniform-sqrt"],
    )
    def test_bounded_by_dominating_constant(self, p, f):
        bound = f.dominating_constant()
        for v in convergence_probe(p, f, [2**3, 2**6, 2**9, 2**12]):
            assert 0 <= v <= bound

    def test_ascending_required(self):
        with pytest.raises(Exception):
            convergence_probe(UniformDensity(), IdentityCompander(), [8, 4])


class TestAsymptotic:
    @pytest.mark.parametrize("s", [0.3, 0.5, 2 / 3, 0.75, 0.9])
    def test_uniform_power_closed_form(self, s):
        # (1/24) int s^-2 x^(2 - 2s) x^-1 dx = 1 / (24 s^2 (2 - 2s))
        assert asymptotic_loss(UniformDensity(), PowerCompander(s)) == pytest.approx(1 / (24 * s * s * (2 - 2 * s)), rel=1e-9)

    @pytest.mark.parametrize("K", [100, 10**4])
    def test_minimax_independent_of_density(self, K):
        cst = solve_maximin_constants(K)
        f = ArcSinhCompander.minimax(K, cst)
        vals = [asymptotic_loss(p, f) for p in (maximin_density(cst), BetaDensity(1, K - 1), UniformDensity(0, 2 / K))]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-6)
        assert vals[0] == pytest.approx(minimax_saddle_loss(cst), rel=1e-8)
        assert vals[0] == pytest.approx(arcsinh_loss_closed_form(f, 1 / K), rel=1e-8)

    def test_bad_prior_identity_diverges(self):
        assert asymptotic_loss(UniformDensity(0, 2 / 256), IdentityCompander()) == math.inf

    def test_power_near_point_mass(self):
        K, s = 1000, 1 / math.log(1000)
        p = UniformDensity(1 / K - 1e-7, 1 / K + 1e-7)
        assert asymptotic_loss(p, PowerCompander(s)) == pytest.approx(power_sup_loss(s, K), rel=1e-6)

    def test_epsilon(self):
        cst = solve_maximin_constants(10**4)
        c = cst.c
        assert approx_vs_minimax_epsilon(cst) == pytest.approx(max(2 * c - 1, 1 / (2 * c) - 1))


class TestOptimalCompander:
    def test_uniform(self):
        f, loss = optimal_compander(UniformDensity())
        x = np.linspace(0, 1, 10_001)
        assert np.max(np.abs(f.forward(x) - x ** (2 / 3))) <= 1e-8
        assert loss == pytest.approx(9 / 64, abs=1e-9)

    def test_perturbations_lose(self):
        p = UniformDensity()
        f, loss = optimal_compander(p)
        assert asymptotic_loss(p, f) == pytest.approx(loss, rel=1e-6)
        for s in (0.6, 0.75, 0.65, 0.7):
            assert asymptotic_loss(p, PowerCompander(s)) > loss

    def test_maximin_gives_minimax(self):
        K = 1000
        cst = solve_maximin_constants(K)
        f, loss = optimal_compander(maximin_density(cst))
        x = np.concatenate([np.logspace(-12, 0, 2000), np.linspace(0, 1, 2001)])
        np.testing.assert_allclose(f.forward(x), ArcSinhCompander.minimax(K, cst).forward(x), atol=1e-6)
        assert loss == pytest.approx(minimax_saddle_loss(cst), rel=1e-8)

    @pytest.mark.parametrize("K,alpha", [(100, 1.0), (50, 0.5), (20, 2.0)])
    def test_beta(self, K, alpha):
        a, b = alpha, (K - 1) * alpha
        f, loss = optimal_compander(BetaDensity(a, b))
        x = np.logspace(-10, 0, 500)
        np.testing.assert_allclose(f.forward(x), BetaCompander(K, alpha).forward(x), atol=1e-8)
        ref = special.beta((a + 1) / 3, (b + 2) / 3) ** 3 / special.beta(a, b) / 24
        assert loss == pytest.approx(ref, rel=1e-8)

    def test_hard_prior_marginal_scaling(self):
        # p**(x) = 2 p*(2x) halves the cube of the normalizer, so the saddle value is exactly twice its optimum
        K = 1000
        cst = solve_maximin_constants(K)
        _, loss = optimal_compander(ScaledDensity(maximin_density(cst), 2.0))
        assert minimax_saddle_loss(cst) / loss == pytest.approx(2.0, rel=1e-6)

    def test_repaired_has_certificate(self):
        oc = optimal_compander(UniformDensity())
        g = oc.repaired(0.1)
        c, alpha = g.certificate()
        assert alpha == 0.5 and c >= 0.1

    def test_vanishing_near_zero_rejected(self):
        with pytest.raises(ParameterError):
            optimal_compander(UniformDensity(0.1, 0.2))

    def test_gap_is_flat_then_repaired(self):
        from klcompand.priors import CustomDensity

        p = CustomDensity(lambda x: np.where((x < 0.3) | (x > 0.6), 1 / 0.7, 0.0), breakpoints=(0.3, 0.6))
        oc = optimal_compander(p)
        v = oc.compander.forward(np.array([0.3, 0.45, 0.6]))
        assert v[0] == pytest.approx(v[2], abs=1e-12)
        assert oc.compander.certificate() is None
        assert oc.repaired(0.05).certificate() is not None
