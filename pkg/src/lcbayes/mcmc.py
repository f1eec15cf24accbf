"""Random-walk Metropolis-within-Gibbs sampler for the mixture prior.

A sweep visits every coordinate once, in the order knots, weights,
gamma1, gamma2 and (hierarchical support only) a then b. Each coordinate
gets its own Gaussian random-walk scale:

* knots ``theta_i``: reflected into ``(0, b - a]``
* sticks ``V_i``: logit scale, Jacobian ``V(1 - V)``
* Dirichlet weights: additive log-ratio coordinates, Jacobian ``prod p_i``
* ``gamma1``: log scale, Jacobian ``gamma1``
* ``gamma2``: plain walk
* ``a`` (reflected below ``X_(1)``) and ``b`` (reflected above
  ``X_(n)``); the knots are rescaled with the width, Jacobian
  ``(L'/L)^N``

Scales adapt by Robbins-Monro towards a target acceptance rate during
burn-in and are frozen afterwards. The inner loop lives in
:mod:`lcbayes._kernels`; everything here is bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import _kernels as K
from .core import (
    DataError,
    MixtureLogDensity,
    NumericError,
    PiecewiseLinearFn,
    ValidationError,
    log_norm_const,
    mixture_to_plf,
)
from .io import write_csv, write_json
from .priors import (
    EmpiricalSupport,
    FixedSupport,
    HierarchicalSupport,
    WEIGHT_FLOOR,
    PriorConfig,
    draw_prior,
    log_prior,
    stick_weights,
    sticks_from_weights,
)

__all__ = [
    "BLOCKS",
    "SamplerSettings",
    "ChainState",
    "Chain",
    "empirical_support",
    "log_likelihood",
    "gibbs_sweep",
    "run_chain",
]

BLOCKS = ("theta", "weights", "gamma1", "gamma2", "support")
AUDIT_TOL = 1e-10
MAX_LOGIT_SCALE = 10.0
MAX_GAMMA2_SCALE = 1e3


class SamplerSettings(BaseModel):
    """Run length, proposal scales and adaptation schedule.

    Initial scales are relative: knots and support in units of the
    support width, gamma2 in units of ``1 / width``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    iterations: int = Field(default=10000, ge=1)
    burn_in: Optional[int] = Field(default=None, ge=0)
    thin: int = Field(default=1, ge=1)
    grid_size: int = Field(default=512, ge=2)
    grid: Optional[tuple[float, float]] = None
    target_accept: float = Field(default=0.30, gt=0, lt=1)
    adapt: bool = True
    adapt_exponent: float = Field(default=0.6, gt=0.5, le=1.0)
    blocks: tuple[Literal["theta", "weights", "gamma1", "gamma2", "support"], ...] = BLOCKS
    theta_scale: float = Field(default=0.1, ge=0)
    weight_scale: float = Field(default=1.0, ge=0)
    gamma1_scale: float = Field(default=0.5, ge=0)
    gamma2_scale: float = Field(default=0.5, ge=0)
    support_scale: float = Field(default=0.05, ge=0)
    audit_every: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _burn_in_fits(self):
        if self.burn_in is not None and self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        return self

    @property
    def n_burn(self) -> int:
        return self.iterations // 2 if self.burn_in is None else self.burn_in

    @property
    def n_kept(self) -> int:
        return (self.iterations - self.n_burn) // self.thin


def empirical_support(data) -> tuple[float, float]:
    """``[X_(1), X_(n)]``; rejects fewer than two or all-equal observations."""
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 2:
        raise DataError("empirical support needs at least two observations")
    if not np.all(np.isfinite(x)):
        raise DataError("data contain non-finite values")
    lo, hi = float(x.min()), float(x.max())
    if not lo < hi:
        raise DataError("all observations are equal; empirical support has zero width")
    return lo, hi


def log_likelihood(m: MixtureLogDensity, data) -> float:
    """``sum_j W(X_j) - n log int e^W``; ``-inf`` if any point leaves the support."""
    x = np.asarray(data, dtype=float).ravel()
    a, b = m.support
    if np.any(x < a) or np.any(x > b):
        return -np.inf
    w = mixture_to_plf(m)
    return float(np.sum(w(x)) - x.size * log_norm_const(w))


# -- parameter vector packing ------------------------------------------------


def _model_code(prior: PriorConfig) -> int:
    return K.STICK if prior.weight_model == "stick_breaking" else K.DIRICHLET


def _support_code(prior: PriorConfig) -> int:
    return K.SUPPORT_HIER if isinstance(prior.support, HierarchicalSupport) else K.SUPPORT_FIXED


def _hyper(prior: PriorConfig) -> np.ndarray:
    hp = np.zeros(7)
    hp[K.HP_MASS] = prior.total_mass
    hp[K.HP_ALPHA] = prior.dirichlet_alpha
    hp[K.HP_S1] = prior.gamma1_scale
    hp[K.HP_S2] = prior.gamma2_scale
    sup = prior.support
    if isinstance(sup, HierarchicalSupport):
        hp[K.HP_ALOC] = sup.a_loc
        hp[K.HP_ASCALE] = sup.a_scale
        hp[K.HP_WSCALE] = sup.width_scale
    return hp


def _alr(p) -> np.ndarray:
    p = np.maximum(np.asarray(p, dtype=float), WEIGHT_FLOOR)
    return np.log(p[:-1]) - np.log(p[-1])


def _prefix(xs) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(xs - xs[0])])


@dataclass(frozen=True)
class ChainState:
    """Sampler state plus cached derived quantities.

    ``stick_vars`` is set in stick-breaking mode only. The caches are
    filled by :meth:`from_mixture` and refreshed by :func:`gibbs_sweep`.
    """

    mixture: MixtureLogDensity
    stick_vars: Optional[np.ndarray]
    plf: PiecewiseLinearFn
    log_norm: float
    log_likelihood: float
    log_prior: float

    @property
    def support(self) -> tuple[float, float]:
        return self.mixture.support

    @property
    def log_posterior(self) -> float:
        return self.log_likelihood + self.log_prior

    @classmethod
    def from_mixture(cls, m: MixtureLogDensity, data, prior: PriorConfig, sticks=None) -> "ChainState":
        if prior.weight_model == "stick_breaking":
            sticks = sticks_from_weights(m.weights) if sticks is None else np.asarray(sticks, dtype=float)
        else:
            sticks = None
        w = mixture_to_plf(m)
        return cls(
            mixture=m,
            stick_vars=sticks,
            plf=w,
            log_norm=log_norm_const(w),
            log_likelihood=log_likelihood(m, data),
            log_prior=log_prior(prior, m, sticks),
        )

    def pack(self) -> np.ndarray:
        m = self.mixture
        wp = self.stick_vars if self.stick_vars is not None else _alr(m.weights)
        return np.concatenate([m.knots, wp, [m.gamma1, m.gamma2, *m.support]]).astype(float)

    def audit(self, data, prior: PriorConfig) -> float:
        """Largest relative gap between the caches and a fresh recomputation."""
        fresh = ChainState.from_mixture(self.mixture, data, prior, self.stick_vars)
        gaps = [
            _rel_gap(self.log_norm, fresh.log_norm),
            _rel_gap(self.log_likelihood, fresh.log_likelihood),
            _rel_gap(self.log_prior, fresh.log_prior),
        ]
        return max(gaps)


def _rel_gap(x, y) -> float:
    if x == y:
        return 0.0
    if not (np.isfinite(x) and np.isfinite(y)):
        return np.inf
    return abs(x - y) / max(1.0, abs(y))


def _unpack(x: np.ndarray, N: int, model: int, ll: float, lp: float) -> ChainState:
    theta = x[:N].copy()
    wp = x[N : 2 * N - 1].copy()
    if model == K.STICK:
        p = stick_weights(wp)
        sticks = wp
    else:
        p = np.empty(N)
        K.weights_from_params(x, N, model, p)
        sticks = None
    m = MixtureLogDensity((x[2 * N + 1], x[2 * N + 2]), theta, p, x[2 * N - 1], x[2 * N])
    w = mixture_to_plf(m)
    return ChainState(m, sticks, w, log_norm_const(w), ll, lp)


def _initial_scales(settings: SamplerSettings, N: int, width: float) -> np.ndarray:
    s = np.empty(2 * N + 3)
    s[:N] = settings.theta_scale * width
    s[N : 2 * N - 1] = settings.weight_scale
    s[2 * N - 1] = settings.gamma1_scale
    s[2 * N] = settings.gamma2_scale / width
    s[2 * N + 1 :] = settings.support_scale * width
    return s


def _max_scales(N: int, width: float) -> np.ndarray:
    # beyond these a reflected or logit walk is already as diffuse as it can usefully be
    s = np.empty(2 * N + 3)
    s[:N] = width
    s[N : 2 * N - 1] = MAX_LOGIT_SCALE
    s[2 * N - 1] = MAX_LOGIT_SCALE
    s[2 * N] = MAX_GAMMA2_SCALE / width
    s[2 * N + 1 :] = width
    return s


def _block_mask(blocks: Sequence[str]) -> np.ndarray:
    return np.array([b in blocks for b in BLOCKS], dtype=np.int64)


def _sorted_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise DataError("no observations")
    if not np.all(np.isfinite(x)):
        raise DataError("data contain non-finite values")
    return np.sort(x)


def gibbs_sweep(
    state: ChainState,
    data,
    prior: PriorConfig,
    rng: np.random.Generator,
    scales=None,
    blocks: Sequence[str] = BLOCKS,
) -> tuple[ChainState, dict]:
    """One full sweep from ``state``.

    Parameters
    ----------
    scales : float or array, optional
        Proposal standard deviations, a scalar for every coordinate or one
        per coordinate of the packed vector. Defaults to the relative
        scales of :class:`SamplerSettings`.
    blocks : sequence of str
        Blocks to update; the others stay fixed.

    Returns
    -------
    state : ChainState
    acceptance : dict
        Accepted fraction per updated block in this sweep.
    """
    xs = _sorted_data(data)
    N = state.mixture.n_knots
    model = _model_code(prior)
    sup = _support_code(prior)
    x = state.pack()
    width = x[2 * N + 2] - x[2 * N + 1]
    if scales is None:
        sc = _initial_scales(SamplerSettings(), N, width)
    else:
        sc = np.broadcast_to(np.asarray(scales, dtype=float), (2 * N + 3,)).copy()
    cur = np.array([state.log_likelihood, state.log_prior])
    acc = np.zeros(5, dtype=np.int64)
    prop = np.zeros(5, dtype=np.int64)
    P = 2 * N + 3
    K.sweep(
        x, cur, sc, sc, _block_mask(blocks), N, model, sup, _hyper(prior), xs, _prefix(xs),
        rng.standard_normal(P), rng.random(P), acc, prop, 0.0, 0.0, np.empty(N), np.empty(N + 2),
    )
    rates = {b: acc[i] / prop[i] for i, b in enumerate(BLOCKS) if prop[i] > 0}
    return _unpack(x, N, model, cur[0], cur[1]), rates


# -- chains --------------------------------------------------------------------


@dataclass(frozen=True)
class Chain:
    """Kept draws of one run.

    ``states`` maps field names to arrays with one row per kept
    iteration: ``iteration, gamma1, gamma2, a, b, log_likelihood,
    log_prior, log_norm`` (1-d), ``theta, weights`` (kept x N) and, in
    stick-breaking mode, ``sticks`` (kept x N-1). ``grid_evals[k, j]`` is
    the density of draw ``k`` at ``grid[j]``.
    """

    states: dict
    grid: np.ndarray
    grid_evals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.states["iteration"].size

    @property
    def n_knots(self) -> int:
        return self.states["theta"].shape[1]

    @property
    def log_posterior(self) -> np.ndarray:
        return self.states["log_likelihood"] + self.states["log_prior"]

    def mixture(self, k: int) -> MixtureLogDensity:
        s = self.states
        return MixtureLogDensity((s["a"][k], s["b"][k]), s["theta"][k], s["weights"][k], s["gamma1"][k], s["gamma2"][k])

    def posterior_mean(self) -> np.ndarray:
        return self.grid_evals.mean(axis=0)

    def evaluate(self, points) -> np.ndarray:
        """Density of every kept draw at ``points``, shape (kept, len(points))."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        s = self.states
        N = self.n_knots
        out = np.empty((len(self), pts.size))
        # the weights are stored directly, so pack them as Dirichlet log-ratios
        for k in range(len(self)):
            x = np.concatenate([s["theta"][k], _alr(s["weights"][k]), [s["gamma1"][k], s["gamma2"][k], s["a"][k], s["b"][k]]])
            K.density_at(x, N, K.DIRICHLET, pts, s["log_norm"][k], np.empty(N), out[k])
        return out

    def save(self, prefix) -> dict:
        """Write ``<prefix>_chain.csv``, ``<prefix>_grid.csv`` and ``<prefix>_meta.json``."""
        s = self.states
        N = self.n_knots
        header = ["iteration", "gamma1", "gamma2", "a", "b"]
        header += [f"theta_{i + 1}" for i in range(N)] + [f"p_{i + 1}" for i in range(N)] + ["log_posterior"]
        lpost = self.log_posterior
        rows = (
            [int(s["iteration"][k]), s["gamma1"][k], s["gamma2"][k], s["a"][k], s["b"][k],
             *s["theta"][k].tolist(), *s["weights"][k].tolist(), float(lpost[k])]
            for k in range(len(self))
        )
        paths = {"chain": write_csv(f"{prefix}_chain.csv", header, (_floats(r) for r in rows))}
        grid_rows = (
            (int(s["iteration"][k]), float(self.grid[j]), float(self.grid_evals[k, j]))
            for k in range(len(self))
            for j in range(self.grid.size)
        )
        paths["grid"] = write_csv(f"{prefix}_grid.csv", ["iteration", "x", "density"], grid_rows)
        paths["meta"] = write_json(f"{prefix}_meta.json", self.meta)
        return paths


def _floats(row):
    return [v if isinstance(v, int) else float(v) for v in row]


def _initial_support(prior: PriorConfig, xs: np.ndarray) -> tuple[float, float]:
    mode = prior.support
    if isinstance(mode, FixedSupport):
        outside = xs[(xs < mode.a) | (xs > mode.b)]
        if outside.size:
            raise DataError(f"{outside.size} observations outside [{mode.a}, {mode.b}], e.g. {outside[:5].tolist()}")
        return mode.a, mode.b
    lo, hi = empirical_support(xs)
    if isinstance(mode, EmpiricalSupport):
        return lo, hi
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _grid(prior: PriorConfig, settings: SamplerSettings, xs, support) -> np.ndarray:
    if settings.grid is not None:
        lo, hi = settings.grid
    elif isinstance(prior.support, HierarchicalSupport):
        # the support moves; use a fixed window around the data
        lo, hi = xs[0], xs[-1]
        pad = 0.1 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    else:
        lo, hi = support
    return np.linspace(lo, hi, settings.grid_size)


def _seed_entropy(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed


def run_chain(cfg, data, seed, init: Optional[MixtureLogDensity] = None) -> Chain:
    """Run one chain.

    Parameters
    ----------
    cfg
        Anything with ``prior`` (:class:`PriorConfig`) and ``sampler``
        (:class:`SamplerSettings`) attributes.
    data : array_like
        Observations, in any order.
    seed : int or numpy.random.SeedSequence
        The chain is a deterministic function of the seed.
    init : MixtureLogDensity, optional
        Starting point. By default knots and weights are drawn from the
        prior, ``gamma1 = 1`` and ``gamma2 = 0``.
    """
    prior: PriorConfig = cfg.prior
    settings: SamplerSettings = cfg.sampler
    xs = _sorted_data(data)
    n = xs.size
    rng = np.random.default_rng(seed)

    if init is None:
        support = _initial_support(prior, xs)
        m0 = draw_prior(prior, rng, n, support=support)
        m0 = replace(m0, gamma1=1.0, gamma2=0.0)
    else:
        m0 = init
        support = m0.support
    N = m0.n_knots
    state = ChainState.from_mixture(m0, xs, prior)
    if not np.isfinite(state.log_likelihood + state.log_prior):
        raise DataError("initial state has zero posterior density (data outside the support?)")

    model = _model_code(prior)
    sup = _support_code(prior)
    hp = _hyper(prior)
    cums = _prefix(xs)
    mask = _block_mask(settings.blocks)
    x = state.pack()
    cur = np.array([state.log_likelihood, state.log_prior])
    width0 = support[1] - support[0]
    scales = _initial_scales(settings, N, width0)
    start_scales = scales.copy()
    max_scales = _max_scales(N, width0)
    P = 2 * N + 3
    p_buf, work = np.empty(N), np.empty(N + 2)

    n_burn = settings.n_burn
    kept = settings.n_kept
    grid = _grid(prior, settings, xs, support)
    rec = {
        "iteration": np.empty(kept, dtype=np.int64),
        "gamma1": np.empty(kept),
        "gamma2": np.empty(kept),
        "a": np.empty(kept),
        "b": np.empty(kept),
        "log_likelihood": np.empty(kept),
        "log_prior": np.empty(kept),
        "log_norm": np.empty(kept),
        "theta": np.empty((kept, N)),
        "weights": np.empty((kept, N)),
    }
    if model == K.STICK:
        rec["sticks"] = np.empty((kept, N - 1))
    evals = np.empty((kept, grid.size))
    acc_burn, prop_burn = np.zeros(5, dtype=np.int64), np.zeros(5, dtype=np.int64)
    acc_keep, prop_keep = np.zeros(5, dtype=np.int64), np.zeros(5, dtype=np.int64)
    worst_audit = 0.0
    k = 0
    for t in range(1, settings.iterations + 1):
        burning = t <= n_burn
        rate = t ** (-settings.adapt_exponent) if (burning and settings.adapt) else 0.0
        acc, prop = (acc_burn, prop_burn) if burning else (acc_keep, prop_keep)
        K.sweep(x, cur, scales, max_scales, mask, N, model, sup, hp, xs, cums,
                rng.standard_normal(P), rng.random(P), acc, prop, rate, settings.target_accept, p_buf, work)
        if settings.audit_every and t % settings.audit_every == 0:
            snap = _unpack(x, N, model, cur[0], cur[1])
            gap = max(snap.audit(xs, prior), _rel_gap(K.log_norm_params(x, N, model, p_buf), snap.log_norm))
            worst_audit = max(worst_audit, gap)
            if gap > AUDIT_TOL:
                raise NumericError(f"cache audit failed at iteration {t}: relative gap {gap:.3e}")
        if burning or (t - n_burn) % settings.thin:
            continue
        if k >= kept:
            continue
        K.weights_from_params(x, N, model, p_buf)
        log_z = K.log_norm(x[:N], p_buf, x[2 * N - 1], x[2 * N], x[2 * N + 2] - x[2 * N + 1])
        rec["iteration"][k] = t
        rec["gamma1"][k] = x[2 * N - 1]
        rec["gamma2"][k] = x[2 * N]
        rec["a"][k] = x[2 * N + 1]
        rec["b"][k] = x[2 * N + 2]
        rec["log_likelihood"][k] = cur[0]
        rec["log_prior"][k] = cur[1]
        rec["log_norm"][k] = log_z
        rec["theta"][k] = x[:N]
        rec["weights"][k] = p_buf
        if model == K.STICK:
            rec["sticks"][k] = x[N : 2 * N - 1]
        K.density_at(x, N, model, grid, log_z, p_buf, evals[k])
        k += 1

    def rates(acc, prop):
        return {b: float(acc[i] / prop[i]) for i, b in enumerate(BLOCKS) if prop[i] > 0}

    block_of = np.array([0] * N + [1] * (N - 1) + [2, 3, 4, 4])
    final = {b: np.exp(np.log(np.maximum(scales[block_of == i], 1e-300)).mean()).item()
             for i, b in enumerate(BLOCKS) if mask[i]}
    meta = {
        "seed": _seed_entropy(seed),
        "n": int(n),
        "n_knots": int(N),
        "iterations": settings.iterations,
        "burn_in": n_burn,
        "thin": settings.thin,
        "kept": kept,
        "weight_model": prior.weight_model,
        "support_mode": prior.support.kind,
        "initial_support": list(support),
        "blocks": list(settings.blocks),
        "acceptance": rates(acc_keep, prop_keep),
        "acceptance_burn_in": rates(acc_burn, prop_burn),
        "adaptation": {
            "scheme": "robbins-monro on log scale, per coordinate",
            "enabled": settings.adapt,
            "target": settings.target_accept,
            "step": f"t^-{settings.adapt_exponent}",
            "frozen_after": n_burn,
            "initial_scale_geomean": {b: float(np.exp(np.log(np.maximum(start_scales[block_of == i], 1e-300)).mean()))
                                      for i, b in enumerate(BLOCKS) if mask[i]},
            "final_scale_geomean": final,
        },
        "proposals": {
            "theta": "gaussian walk reflected into (0, b-a]",
            "weights": "logit walk on sticks" if model == K.STICK else "additive log-ratio walk",
            "gamma1": "log-scale walk",
            "gamma2": "gaussian walk",
            "support": "a reflected below X(1), b reflected above X(n), knots rescaled",
        },
        "audit_every": settings.audit_every,
        "audit_max_gap": worst_audit if settings.audit_every else None,
    }
    return Chain(rec, grid, evals, meta)
