import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from lcbayes.core import DataError, PiecewiseLinearFn, hellinger, log_norm_const
from lcbayes.data_gen import Gaussian, Uniform
from lcbayes.mle import hellinger_to_truth, integral_terms, logconcave_mle


def objective(x, w, phi):
    """Direct objective with quadrature for the integral (oracle route)."""
    f = PiecewiseLinearFn(x, phi)
    total = sum(integrate.quad(lambda t: math.exp(float(f(t))), lo, hi, epsrel=1e-12)[0]
                for lo, hi in zip(x[:-1], x[1:]))
    return float(w @ phi) - total + 1.0


class TestIntegralTerms:
    @given(st.floats(-30, 30), st.floats(-30, 30))
    @settings(max_examples=200)
    def test_against_quadrature(self, r, s):
        J, J_r, J_s, J_rr, J_rs, J_ss = integral_terms(r, s)
        ref = integrate.quad(lambda t: math.exp((1 - t) * r + t * s), 0, 1, epsrel=1e-13)[0]
        assert J == pytest.approx(ref, rel=1e-11)
        ref_r = integrate.quad(lambda t: (1 - t) * math.exp((1 - t) * r + t * s), 0, 1, epsrel=1e-13)[0]
        ref_rs = integrate.quad(lambda t: t * (1 - t) * math.exp((1 - t) * r + t * s), 0, 1, epsrel=1e-13)[0]
        assert J_r == pytest.approx(ref_r, rel=1e-9, abs=1e-300)
        assert J_rs == pytest.approx(ref_rs, rel=1e-9, abs=1e-300)

    def test_symmetry(self):
        J1 = integral_terms(0.3, -2.0)
        J2 = integral_terms(-2.0, 0.3)
        assert J1[0] == pytest.approx(J2[0], rel=1e-15)
        assert J1[1] == pytest.approx(J2[2], rel=1e-14)
        assert J1[3] == pytest.approx(J2[5], rel=1e-14)


class TestTwoPoints:
    def test_uniform(self):
        res = logconcave_mle([0.0, 1.0])
        assert res.converged
        np.testing.assert_allclose(res.plf.values, [0.0, 0.0], atol=1e-8)
        assert res.support == (0.0, 1.0)

    def test_grid_search_agrees(self):
        x, w = np.array([0.0, 1.0]), np.array([0.5, 0.5])
        grid = np.linspace(-1, 1, 81)
        best = max(((objective(x, w, np.array([a, b])), a, b) for a in grid for b in grid))
        assert (best[1], best[2]) == (0.0, 0.0)


class TestOptimality:
    @pytest.mark.parametrize("seed", range(5))
    def test_against_constrained_solver(self, seed):
        rng = np.random.default_rng(seed)
        data = np.sort(rng.normal(size=12))
        res = logconcave_mle(data)
        x, w = data, np.full(data.size, 1 / data.size)
        dx = np.diff(x)
        # rows give s_j - s_{j+1} in terms of phi; concavity needs them >= 0
        A = np.zeros((x.size - 2, x.size))
        for j in range(x.size - 2):
            A[j, j] -= 1 / dx[j]
            A[j, j + 1] += 1 / dx[j] + 1 / dx[j + 1]
            A[j, j + 2] -= 1 / dx[j + 1]

        def neg(phi):
            J = integral_terms(phi[:-1], phi[1:])[0]
            return -(w @ phi - dx @ J + 1)

        sol = optimize.minimize(neg, np.full(x.size, -math.log(x[-1] - x[0])), method="SLSQP",
                                constraints=[{"type": "ineq", "fun": lambda p: A @ p}],
                                options={"ftol": 1e-14, "maxiter": 2000})
        assert -sol.fun <= res.objective_trace[-1] + 1e-9
        np.testing.assert_allclose(res.plf.values, sol.x, atol=2e-4)

    def test_trace_monotone_and_stationary(self):
        for seed, n in [(0, 10), (1, 100), (2, 1000)]:
            res = logconcave_mle(np.random.default_rng(seed).normal(size=n))
            assert res.converged
            assert np.all(np.diff(res.objective_trace) >= 0)
            assert res.gradient_norm <= 1e-7
            assert res.plf.is_concave()
            assert math.exp(log_norm_const(res.plf)) == pytest.approx(1.0, abs=1e-8)

    def test_beats_uniform(self):
        data = np.sort(np.random.default_rng(3).gamma(2.0, size=200))
        res = logconcave_mle(data)
        x, counts = np.unique(data, return_counts=True)
        flat = np.full(x.size, -math.log(x[-1] - x[0]))
        assert res.objective_trace[-1] >= objective(x, counts / data.size, flat)

    def test_ties_counted(self):
        data = np.array([0.0, 0.5, 0.5, 0.5, 1.0, 2.0])
        res = logconcave_mle(data)
        assert res.converged
        np.testing.assert_array_equal(res.breakpoints, [0.0, 0.5, 1.0, 2.0])


class TestAffineEquivariance:
    @pytest.mark.parametrize("sigma, mu", [(2.5, -1.0), (0.1, 7.0)])
    def test_transform(self, sigma, mu):
        data = np.random.default_rng(4).normal(size=300)
        f = logconcave_mle(data)
        g = logconcave_mle(sigma * data + mu)
        z = np.linspace(*g.support, 2001)[1:-1]
        lhs = g.pdf(z)
        rhs = f.pdf((z - mu) / sigma) / sigma
        assert np.max(np.abs(lhs / rhs - 1)) <= 1e-6


class TestHellinger:
    def test_improves_with_n(self):
        stream = np.random.default_rng(5).normal(size=1000)
        truth = Gaussian()
        h100 = hellinger_to_truth(logconcave_mle(stream[:100]), truth)
        h1000 = hellinger_to_truth(logconcave_mle(stream), truth)
        assert h1000 < h100

    def test_uniform_truth(self):
        data = np.random.default_rng(6).random(10_000)
        assert hellinger_to_truth(logconcave_mle(data), Uniform()) < 0.1

    def test_self_and_disjoint(self):
        res = logconcave_mle(np.random.default_rng(7).random(50))
        assert hellinger_to_truth(res, res) == 0.0
        assert hellinger(res, Uniform(low=5.0, high=6.0), convention="full") == pytest.approx(math.sqrt(2), abs=1e-6)


class TestErrors:
    def test_too_few(self):
        with pytest.raises(DataError):
            logconcave_mle([1.0])

    def test_all_equal(self):
        with pytest.raises(DataError):
            logconcave_mle([2.0, 2.0, 2.0])

    def test_non_finite(self):
        with pytest.raises(DataError):
            logconcave_mle([0.0, np.nan, 1.0])

    def test_max_iter_reports_best(self):
        res = logconcave_mle(np.random.default_rng(8).normal(size=500), max_iter=2)
        assert not res.converged
        assert np.all(np.diff(res.objective_trace) >= 0)
