import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lcbayes.core import MixtureLogDensity, mixture_to_plf, log_norm_const
from lcbayes.priors import (
    FixedSupport,
    HierarchicalSupport,
    PriorConfig,
    draw_prior,
    log_prior,
    stick_weights,
    sticks_from_weights,
    truncation_level,
)

FIG1 = PriorConfig(truncation=10, support=FixedSupport(a=0.0, b=1.0))


class TestTruncationLevel:
    @pytest.mark.parametrize("n, expected", [(1500, 32), (2, 1), (50, 9)])
    def test_values(self, n, expected):
        assert truncation_level(n, 1.0) == expected

    @given(st.integers(2, 10**7), st.floats(0.1, 5))
    def test_formula(self, n, C):
        assert truncation_level(n, C) == max(1, math.ceil(C * n**0.2 * math.log(n)))


class TestDrawPrior:
    def test_single_stick(self):
        cfg = PriorConfig(truncation=1, support=FixedSupport(a=0, b=1))
        for seed in range(5):
            assert draw_prior(cfg, np.random.default_rng(seed)).weights.tolist() == [1.0]

    def test_reproducible_and_concave(self):
        rng1, rng2 = np.random.default_rng(3), np.random.default_rng(3)
        for _ in range(5):
            m1, m2 = draw_prior(FIG1, rng1), draw_prior(FIG1, rng2)
            np.testing.assert_array_equal(m1.knots, m2.knots)
            np.testing.assert_array_equal(m1.weights, m2.weights)
            assert (m1.gamma1, m1.gamma2) == (m2.gamma1, m2.gamma2)
            assert mixture_to_plf(m1).is_concave()

    def test_first_stick_mean(self):
        cfg = PriorConfig(truncation=32, support=FixedSupport(a=0, b=1))
        rng = np.random.default_rng(7)
        p1 = np.array([draw_prior(cfg, rng).weights[0] for _ in range(100_000)])
        assert abs(p1.mean() - 0.5) < 3 * math.sqrt(1 / 12 / p1.size)

    def test_stick_moments(self):
        H = 2.5
        cfg = PriorConfig(truncation=3, total_mass=H, support=FixedSupport(a=0, b=1))
        rng = np.random.default_rng(8)
        v = np.array([sticks_from_weights(draw_prior(cfg, rng).weights) for _ in range(100_000)])
        ref = stats.beta(1, H)
        for j in range(2):
            assert abs(v[:, j].mean() - ref.mean()) < 3 * ref.std() / math.sqrt(v.shape[0])

    @pytest.mark.parametrize("model", ["stick_breaking", "dirichlet_multinomial"])
    def test_invariants(self, model):
        cfg = PriorConfig(truncation=20, weight_model=model, dirichlet_alpha=0.5,
                          support=HierarchicalSupport())
        rng = np.random.default_rng(9)
        for _ in range(500):
            m = draw_prior(cfg, rng)
            assert abs(m.weights.sum() - 1) <= 1e-12
            w = mixture_to_plf(m)
            assert w.is_concave()
            assert np.isfinite(log_norm_const(w))

    def test_empirical_needs_support(self):
        with pytest.raises(ValueError):
            draw_prior(PriorConfig(truncation=3), np.random.default_rng(0))


class TestLogPrior:
    def test_negative_gamma1(self):
        # the constructor rejects gamma1 < 0, so build the state by hand
        m = MixtureLogDensity.__new__(MixtureLogDensity)
        object.__setattr__(m, "support", (0.0, 1.0))
        object.__setattr__(m, "knots", np.array([0.5]))
        object.__setattr__(m, "weights", np.array([1.0]))
        object.__setattr__(m, "gamma1", -0.5)
        object.__setattr__(m, "gamma2", 0.0)
        assert log_prior(FIG1, m) == -np.inf

    def test_reference_point(self):
        N = 4
        cfg = PriorConfig(truncation=N, support=FixedSupport(a=0, b=1))
        sticks = np.full(N - 1, 0.5)
        m = MixtureLogDensity((0, 1), np.full(N, 0.5), stick_weights(sticks), 0.0, 0.0)
        assert log_prior(cfg, m, sticks=sticks) == pytest.approx(math.log(2 / math.pi) + math.log(1 / math.pi), abs=1e-14)

    def test_matches_scipy_densities(self):
        cfg = PriorConfig(truncation=3, total_mass=2.0, gamma1_scale=0.7, gamma2_scale=1.3,
                          support=HierarchicalSupport(a_loc=0.5, a_scale=2.0, width_scale=3.0))
        sticks = np.array([0.2, 0.6])
        m = MixtureLogDensity((-0.4, 1.6), [0.3, 1.1, 2.0], stick_weights(sticks), 1.7, -0.4)
        ref = (
            3 * stats.uniform(0, 2.0).logpdf(0.5)
            + stats.beta(1, 2.0).logpdf(sticks).sum()
            + stats.halfcauchy(scale=0.7).logpdf(1.7)
            + stats.cauchy(scale=1.3).logpdf(-0.4)
            + stats.cauchy(0.5, 2.0).logpdf(-0.4)
            + stats.halfcauchy(scale=3.0).logpdf(2.0)
        )
        assert log_prior(cfg, m, sticks=sticks) == pytest.approx(ref, abs=1e-12)

    def test_dirichlet_matches_scipy(self):
        cfg = PriorConfig(truncation=3, weight_model="dirichlet_multinomial", dirichlet_alpha=0.9,
                          support=FixedSupport(a=0, b=1))
        p = np.array([0.2, 0.5, 0.3])
        m = MixtureLogDensity((0, 1), [0.3, 0.6, 0.9], p, 1.0, 0.5)
        ref = stats.dirichlet(np.full(3, 0.3)).logpdf(p) + stats.halfcauchy().logpdf(1.0) + stats.cauchy().logpdf(0.5)
        assert log_prior(cfg, m) == pytest.approx(ref, abs=1e-12)

    def test_dirichlet_exchangeable(self):
        cfg = PriorConfig(truncation=4, weight_model="dirichlet_multinomial", support=FixedSupport(a=0, b=1))
        rng = np.random.default_rng(10)
        m = draw_prior(cfg, rng)
        perm = rng.permutation(4)
        m2 = MixtureLogDensity(m.support, m.knots[perm], m.weights[perm], m.gamma1, m.gamma2)
        assert log_prior(cfg, m) == pytest.approx(log_prior(cfg, m2), abs=1e-12)


class TestConfig:
    def test_alpha_bounded_by_mass(self):
        with pytest.raises(ValueError):
            PriorConfig(weight_model="dirichlet_multinomial", dirichlet_alpha=2.0, total_mass=1.0)

    def test_round_trip_json(self):
        cfg = PriorConfig(truncation=5, support=HierarchicalSupport(a_loc=1.0))
        assert PriorConfig.model_validate_json(cfg.model_dump_json()) == cfg

    def test_rejects_unknown_field(self):
        with pytest.raises(ValueError):
            PriorConfig(truncaton=5)
