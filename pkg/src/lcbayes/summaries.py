"""Posterior functionals and the simulation harness.

Randomness: replication ``r`` at sample size ``n`` under master seed ``s``
uses ``SeedSequence(s, spawn_key=(n, r, 0))`` for the data and
``SeedSequence(s, spawn_key=(n, r, 1))`` for the chain, so every
replication can be rerun on its own and results do not depend on the
order or process in which replications run.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import GridDensity, ValidationError, hellinger, mixture_to_plf, mode_of
from .data_gen import sample_truth
from .mcmc import run_chain

__all__ = [
    "BandSummary",
    "ModeMarginal",
    "CoverageTable",
    "RateResult",
    "replication_seeds",
    "band_from_chain",
    "pointwise_band",
    "mode_marginal",
    "coverage_experiment",
    "rate_diagnostic",
]

QUANTILE_METHOD = "linear"  # Hyndman-Fan type 7


@dataclass(frozen=True)
class BandSummary:
    """Posterior mean and pointwise equal-tailed credible band on a grid."""

    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def rows(self):
        return zip(self.grid.tolist(), self.mean.tolist(), self.lower.tolist(), self.upper.tolist())


def pointwise_band(evals, level: float = 0.95):
    """Type-7 quantiles ``(1 -/+ level) / 2`` down the columns of ``evals``."""
    evals = np.asarray(evals, dtype=float)
    if evals.ndim != 2 or evals.shape[0] == 0:
        raise ValidationError("chain", "no kept draws to summarize")
    if not 0.0 < level <= 1.0:
        raise ValidationError("level", "level must be in (0, 1]")
    q = (1.0 - level) / 2.0
    lower, upper = np.quantile(evals, [q, 1.0 - q], axis=0, method=QUANTILE_METHOD)
    return lower, upper


def band_from_chain(chain, level: float = 0.95) -> BandSummary:
    """Mean and pointwise credible band of the kept draws on the chain grid.

    Level 1.0 gives the pointwise min/max envelope.
    """
    evals = np.asarray(chain.grid_evals, dtype=float)
    lower, upper = pointwise_band(evals, level)
    return BandSummary(np.asarray(chain.grid, dtype=float), evals.mean(axis=0), lower, upper, float(level))


@dataclass(frozen=True)
class ModeMarginal:
    """Posterior draws of the mode and their Freedman-Diaconis histogram."""

    modes: np.ndarray
    breaks: np.ndarray
    counts: np.ndarray


def mode_marginal(chain) -> ModeMarginal:
    """Mode of every kept draw, binned with the Freedman-Diaconis rule."""
    modes = np.array([mode_of(mixture_to_plf(chain.mixture(k))) for k in range(len(chain))])
    if modes.size == 0:
        raise ValidationError("chain", "no kept draws to summarize")
    counts, breaks = np.histogram(modes, bins="fd")
    return ModeMarginal(modes, breaks, counts)


def replication_seeds(master: int, n: int, rep: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Data and chain seed sequences for one replication."""
    return (
        np.random.SeedSequence(master, spawn_key=(n, rep, 0)),
        np.random.SeedSequence(master, spawn_key=(n, rep, 1)),
    )


@dataclass(frozen=True)
class CoverageTable:
    """Hit counts of pointwise credible intervals for ``f0(x)``.

    ``hits[i, j]`` counts replications at ``n_values[i]`` whose interval
    at ``points[j]`` contains the true density value.
    """

    points: np.ndarray
    n_values: np.ndarray
    hits: np.ndarray
    replications: np.ndarray
    level: float = 0.95

    @property
    def frequencies(self) -> np.ndarray:
        return self.hits / self.replications[:, None]

    def stack(self, other: "CoverageTable") -> "CoverageTable":
        """Rows of both tables (same points and level)."""
        if not np.array_equal(self.points, other.points) or self.level != other.level:
            raise ValidationError("coverage", "tables must share points and level")
        return CoverageTable(
            self.points,
            np.concatenate([self.n_values, other.n_values]),
            np.vstack([self.hits, other.hits]),
            np.concatenate([self.replications, other.replications]),
            self.level,
        )

    def header(self) -> list:
        return ["n"] + [f"x={x:g}" for x in self.points]

    def rows(self):
        for n, row in zip(self.n_values.tolist(), self.frequencies.tolist()):
            yield [int(n)] + row


def _coverage_rep(rep, truth, points, n, cfg, master, level, fit):
    data_seed, chain_seed = replication_seeds(master, n, rep)
    data = sample_truth(truth, np.random.default_rng(data_seed), n)
    chain = fit(cfg, data, chain_seed)
    lower, upper = pointwise_band(chain.evaluate(points), level)
    f0 = truth.pdf(points)
    return (lower <= f0) & (f0 <= upper)


def _map(fn, items, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def coverage_experiment(
    truth,
    points: Sequence[float],
    n: int,
    replications: int,
    cfg,
    seed: int,
    level: float = 0.95,
    fit: Callable = run_chain,
    jobs: int = 1,
) -> CoverageTable:
    """One row of a coverage table.

    Each replication draws ``n`` observations from ``truth``, runs
    ``fit(cfg, data, seed_sequence)`` and records whether the pointwise
    ``level`` credible interval for ``f(x)`` contains ``truth.pdf(x)``.

    ``fit`` must return an object with ``evaluate(points)`` giving the
    density of every kept draw at ``points`` (for instance a
    :class:`~lcbayes.mcmc.Chain`); it must be picklable when ``jobs > 1``.
    """
    if replications < 1:
        raise ValidationError("replications", "need at least one replication")
    pts = np.asarray(points, dtype=float)
    run = partial(_coverage_rep, truth=truth, points=pts, n=n, cfg=cfg, master=seed, level=level, fit=fit)
    hits = np.sum(_map(run, range(replications), jobs), axis=0).astype(np.int64)
    return CoverageTable(pts, np.array([n]), hits[None, :], np.array([replications]), level)


@dataclass(frozen=True)
class RateResult:
    """Least-squares fit of ``log h`` on ``log n``.

    ``distances[i, r]`` is the Hellinger distance of the posterior mean to
    the truth for ``n_values[i]`` and replication ``r``. ``degenerate`` is
    set (and the fit left as NaN) when some distance is zero or fewer than
    two distinct sample sizes remain.
    """

    n_values: np.ndarray
    distances: np.ndarray
    slope: float
    stderr: float
    intercept: float
    degenerate: bool
    extra: dict = field(default_factory=dict)


def _rate_rep(job, truth, cfg, master, fit):
    n, rep = job
    data_seed, chain_seed = replication_seeds(master, n, rep)
    data = sample_truth(truth, np.random.default_rng(data_seed), n)
    chain = fit(cfg, data, chain_seed)
    mean = GridDensity(chain.grid, np.asarray(chain.grid_evals).mean(axis=0))
    return hellinger(mean, truth)


def rate_diagnostic(
    truth,
    n_values: Sequence[int],
    cfg,
    seed: int,
    replications: int = 10,
    fit: Callable = run_chain,
    jobs: int = 1,
) -> RateResult:
    """Slope of ``log h(posterior mean, truth)`` against ``log n``.

    The posterior mean is the average of the draws on the chain grid,
    linearly interpolated (:class:`~lcbayes.core.GridDensity`).
    """
    ns = np.asarray(n_values, dtype=int)
    if ns.size < 3:
        raise ValidationError("n_values", "need at least three sample sizes")
    jobs_list = [(int(n), r) for n in ns for r in range(replications)]
    run = partial(_rate_rep, truth=truth, cfg=cfg, master=seed, fit=fit)
    h = np.asarray(_map(run, jobs_list, jobs), dtype=float).reshape(ns.size, replications)
    if np.any(h <= 0) or np.unique(ns).size < 2:
        return RateResult(ns, h, np.nan, np.nan, np.nan, True)
    x = np.repeat(np.log(ns), replications)
    fit_ = stats.linregress(x, np.log(h).ravel())
    return RateResult(ns, h, float(fit_.slope), float(fit_.stderr), float(fit_.intercept), False)
