"""Shared generators for randomized test inputs."""

import numpy as np
from hypothesis import strategies as st

from lcbayes.core import MixtureLogDensity, PiecewiseLinearFn, log_norm_const, mixture_to_plf


def random_concave_plf(rng, segments=None, lo=-3.0, hi=3.0, slope_scale=3.0):
    k = int(rng.integers(1, 25)) if segments is None else segments
    gaps = rng.uniform(0.05, 1.0, k)
    x = lo + (hi - lo) * np.concatenate([[0.0], np.cumsum(gaps)]) / gaps.sum()
    slopes = np.sort(rng.normal(0.0, slope_scale, x.size - 1))[::-1]
    v = rng.normal() + np.concatenate([[0.0], np.cumsum(np.diff(x) * slopes)])
    return PiecewiseLinearFn(x, v)


def random_mixture(rng, N=None, support=(0.0, 1.0)):
    N = int(rng.integers(1, 12)) if N is None else N
    a, b = support
    theta = (b - a) * (1.0 - rng.random(N))
    p = rng.dirichlet(np.ones(N))
    p = p / p.sum()
    return MixtureLogDensity(support, theta, p, abs(rng.standard_cauchy()), rng.standard_cauchy())


@st.composite
def concave_plfs(draw, max_segments=12):
    k = draw(st.integers(1, max_segments))
    gaps = draw(st.lists(st.floats(0.05, 2.0), min_size=k, max_size=k))
    slopes = sorted(draw(st.lists(st.floats(-20, 20), min_size=k, max_size=k)), reverse=True)
    start = draw(st.floats(-5, 5))
    x = start + np.concatenate([[0.0], np.cumsum(gaps)])
    v = draw(st.floats(-5, 5)) + np.concatenate([[0.0], np.cumsum(np.asarray(gaps) * np.asarray(slopes))])
    return PiecewiseLinearFn(x, v)


def restricted_oracle_distance(seed, block="gamma2", iterations=200_000):
    """Sup-CDF distance between a one-coordinate chain and a grid posterior.

    The restricted model has one knot at 0.4 and support [0, 1]. Only
    ``block`` moves: gamma2 under a Cauchy(0, 10) prior with gamma1 = 2,
    or gamma1 under a half-Cauchy(0, 10) prior with gamma2 = -1. The
    oracle normalizes the unnormalized posterior on a fine grid.
    """
    from types import SimpleNamespace

    from scipy import stats

    from lcbayes.mcmc import SamplerSettings, log_likelihood, run_chain
    from lcbayes.priors import FixedSupport, PriorConfig

    data = np.array([0.05, 0.1, 0.12, 0.2, 0.25, 0.3, 0.33, 0.41, 0.45, 0.52, 0.6, 0.7, 0.85])
    prior = PriorConfig(truncation=1, gamma1_scale=10.0, gamma2_scale=10.0, support=FixedSupport(a=0.0, b=1.0))
    if block == "gamma2":
        grid = np.linspace(-15.0, 25.0, 8001)
        mix = [MixtureLogDensity((0.0, 1.0), [0.4], [1.0], 2.0, g) for g in grid]
        init = mix[grid.size // 2]
    else:
        grid = np.linspace(0.0, 40.0, 8001)[1:]
        mix = [MixtureLogDensity((0.0, 1.0), [0.4], [1.0], g, -1.0) for g in grid]
        init = MixtureLogDensity((0.0, 1.0), [0.4], [1.0], 1.0, -1.0)
    logpost = np.array([log_likelihood(m, data) for m in mix]) + stats.cauchy(0.0, 10.0).logpdf(grid)
    dens = np.exp(logpost - logpost.max())
    cdf = np.cumsum(dens)
    cdf /= cdf[-1]

    settings = SamplerSettings(iterations=iterations, burn_in=2000, blocks=(block,))
    chain = run_chain(SimpleNamespace(prior=prior, sampler=settings), data, seed, init=init)
    draws = np.sort(chain.states[block])
    ecdf = np.searchsorted(draws, grid, side="right") / draws.size
    return float(np.max(np.abs(ecdf - cdf))), chain


class RiggedChain:
    """Chain stand-in whose every kept draw is the truth itself."""

    def __init__(self, truth, kept=3, grid_size=512):
        self.truth = truth
        self.kept = kept
        self.grid = np.linspace(*truth.support, grid_size)
        self.grid_evals = np.tile(truth.pdf(self.grid), (kept, 1))

    def __len__(self):
        return self.kept

    def evaluate(self, points):
        return np.tile(self.truth.pdf(np.asarray(points, dtype=float)), (self.kept, 1))


class RiggedFit:
    """Picklable ``fit(cfg, data, seed)`` returning a :class:`RiggedChain`."""

    def __init__(self, truth):
        self.truth = truth

    def __call__(self, cfg, data, seed):
        return RiggedChain(self.truth)


def constant_chain(mixture, kept=4, grid_size=64):
    """A :class:`~lcbayes.mcmc.Chain` holding ``kept`` copies of one mixture."""
    from lcbayes.core import normalize
    from lcbayes.mcmc import Chain

    w = mixture_to_plf(mixture)
    grid = np.linspace(*mixture.support, grid_size)
    rep = lambda v: np.repeat(np.asarray(v, dtype=float)[None], kept, axis=0)  # noqa: E731
    states = {
        "iteration": np.arange(1, kept + 1),
        "gamma1": np.full(kept, mixture.gamma1),
        "gamma2": np.full(kept, mixture.gamma2),
        "a": np.full(kept, mixture.support[0]),
        "b": np.full(kept, mixture.support[1]),
        "log_likelihood": np.zeros(kept),
        "log_prior": np.zeros(kept),
        "log_norm": np.full(kept, log_norm_const(w)),
        "theta": rep(mixture.knots),
        "weights": rep(mixture.weights),
    }
    return Chain(states, grid, rep(normalize(w).pdf(grid)))
