"""Truncated priors over :class:`~lcbayes.core.MixtureLogDensity`."""

from __future__ import annotations

import math
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln

from .core import MixtureLogDensity, ValidationError

__all__ = [
    "FixedSupport",
    "EmpiricalSupport",
    "HierarchicalSupport",
    "PriorConfig",
    "truncation_level",
    "stick_weights",
    "sticks_from_weights",
    "draw_prior",
    "log_prior",
]


WEIGHT_FLOOR = 1e-300


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FixedSupport(_Frozen):
    kind: Literal["fixed"] = "fixed"
    a: float
    b: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.a < self.b:
            raise ValueError("fixed support needs a < b")
        return self


class EmpiricalSupport(_Frozen):
    """Support set to the sample range ``[X_(1), X_(n)]``."""

    kind: Literal["empirical"] = "empirical"


class HierarchicalSupport(_Frozen):
    """``a ~ Cauchy(a_loc, a_scale)``, ``b - a ~ Cauchy_+(0, width_scale)``."""

    kind: Literal["hierarchical"] = "hierarchical"
    a_loc: float = 0.0
    a_scale: float = Field(default=1.0, gt=0)
    width_scale: float = Field(default=1.0, gt=0)


SupportMode = Annotated[
    Union[FixedSupport, EmpiricalSupport, HierarchicalSupport],
    Field(discriminator="kind"),
]


class PriorConfig(_Frozen):
    """Prior hyperparameters.

    Knots are uniform on ``[0, b - a]``. ``truncation`` fixes N directly;
    when it is None, N is ``truncation_level(n, truncation_constant)``.
    """

    truncation: Optional[int] = Field(default=None, ge=1)
    truncation_constant: float = Field(default=1.0, gt=0)
    total_mass: float = Field(default=1.0, gt=0)
    weight_model: Literal["stick_breaking", "dirichlet_multinomial"] = "stick_breaking"
    dirichlet_alpha: float = Field(default=1.0, gt=0)
    gamma1_scale: float = Field(default=1.0, gt=0)
    gamma2_scale: float = Field(default=1.0, gt=0)
    support: SupportMode = Field(default_factory=EmpiricalSupport)

    @model_validator(mode="after")
    def _alpha_within_mass(self):
        if self.dirichlet_alpha > self.total_mass:
            raise ValueError("dirichlet_alpha must not exceed total_mass")
        return self

    def n_knots(self, n: Optional[int] = None) -> int:
        if self.truncation is not None:
            return self.truncation
        if n is None:
            raise ValidationError("truncation", "sample size needed to derive N")
        return truncation_level(n, self.truncation_constant)


def truncation_level(n: int, C: float = 1.0) -> int:
    """``ceil(C * n^(1/5) * log n)``."""
    if n < 2 or C <= 0:
        raise ValidationError("truncation", "need n >= 2 and C > 0")
    return max(1, math.ceil(C * n**0.2 * math.log(n)))


def stick_weights(sticks) -> np.ndarray:
    """``p_i = V_i prod_{j<i}(1 - V_j)``, last weight takes the remaining stick."""
    v = np.asarray(sticks, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    return np.concatenate([v * remaining[:-1], remaining[-1:]])


def sticks_from_weights(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    left = 1.0 - np.concatenate([[0.0], np.cumsum(p[:-2])])
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(left > 0, p[:-1] / left, 0.0)
    return np.clip(v, 0.0, 1.0)


def _draw_support(cfg: PriorConfig, rng, support):
    if support is not None:
        return tuple(float(t) for t in support)
    mode = cfg.support
    if isinstance(mode, FixedSupport):
        return mode.a, mode.b
    if isinstance(mode, HierarchicalSupport):
        a = mode.a_loc + mode.a_scale * rng.standard_cauchy()
        width = abs(mode.width_scale * rng.standard_cauchy())
        return a, a + width
    raise ValidationError("support", "empirical support needs the data range passed in")


def draw_prior(
    cfg: PriorConfig,
    rng: np.random.Generator,
    n: Optional[int] = None,
    support: Optional[tuple[float, float]] = None,
) -> MixtureLogDensity:
    """One draw from the truncated prior.

    ``support`` overrides the configured support mode (required for
    empirical mode, where it is the data range).
    """
    N = cfg.n_knots(n)
    a, b = _draw_support(cfg, rng, support)
    width = b - a
    # (0, width]: 1 - U with U in [0, 1)
    theta = width * (1.0 - rng.random(N))
    if cfg.weight_model == "stick_breaking":
        p = stick_weights(rng.beta(1.0, cfg.total_mass, size=N - 1))
    else:
        # small concentrations make numpy return exact zeros, outside the open simplex
        p = np.maximum(rng.dirichlet(np.full(N, cfg.dirichlet_alpha / N)), WEIGHT_FLOOR)
        p = p / p.sum()
    gamma1 = abs(cfg.gamma1_scale * rng.standard_cauchy())
    gamma2 = cfg.gamma2_scale * rng.standard_cauchy()
    return MixtureLogDensity((a, b), theta, p, gamma1, gamma2)


def _log_cauchy(x, loc, scale):
    z = (x - loc) / scale
    return -math.log(math.pi * scale) - math.log1p(z * z)


def log_prior(cfg: PriorConfig, m: MixtureLogDensity, sticks=None) -> float:
    """Joint log prior density of knots, weights, gamma1, gamma2 and support.

    Stick-breaking weights are scored in stick coordinates ``V_1..V_{N-1}``
    (recovered from ``m.weights`` when ``sticks`` is None); Dirichlet weights
    are scored on the first N-1 simplex coordinates. The support term is
    present only in hierarchical mode.
    """
    a, b = m.support
    width = b - a
    theta, p = m.knots, m.weights
    N = theta.size
    if width <= 0 or np.any(theta <= 0) or np.any(theta > width * (1 + 1e-12)):
        return -np.inf
    lp = -N * math.log(width)

    if cfg.weight_model == "stick_breaking":
        v = sticks_from_weights(p) if sticks is None else np.asarray(sticks, dtype=float)
        if np.any(v < 0) or np.any(v > 1):
            return -np.inf
        H = cfg.total_mass
        if v.size:
            with np.errstate(divide="ignore"):
                tail = (H - 1.0) * np.log1p(-v) if H != 1.0 else np.zeros_like(v)
            lp += v.size * math.log(H) + float(np.sum(tail))
    else:
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            return -np.inf
        alpha_i = cfg.dirichlet_alpha / N
        with np.errstate(divide="ignore"):
            lp += gammaln(cfg.dirichlet_alpha) - N * gammaln(alpha_i) + float(np.sum((alpha_i - 1.0) * np.log(p)))

    if m.gamma1 < 0:
        return -np.inf
    lp += math.log(2.0) + _log_cauchy(m.gamma1, 0.0, cfg.gamma1_scale)
    lp += _log_cauchy(m.gamma2, 0.0, cfg.gamma2_scale)

    mode = cfg.support
    if isinstance(mode, HierarchicalSupport):
        lp += _log_cauchy(a, mode.a_loc, mode.a_scale)
        lp += math.log(2.0) + _log_cauchy(width, 0.0, mode.width_scale)
    return float(lp)
