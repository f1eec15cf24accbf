"""Synthetic truth densities used by the experiments.

Samplers (numpy ``Generator``): normal by ziggurat, gamma by
Marsaglia-Tsang, beta as a ratio of gammas, Laplace and uniform by
inversion. Reproducibility is statistical, tied to the numpy version.
"""

from __future__ import annotations

from typing import Annotated, ClassVar, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator
from scipy import stats

__all__ = [
    "Gaussian",
    "Gamma",
    "Beta",
    "Laplace",
    "Uniform",
    "Mixture2",
    "TruthSpec",
    "parse_truth",
    "sample_truth",
    "eval_truth",
]

TAIL_MASS = 1e-15


class _Truth(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    log_concave: ClassVar[bool] = True

    # -- family specifics -------------------------------------------------
    def _dist(self):
        raise NotImplementedError

    @property
    def natural_support(self) -> tuple[float, float]:
        lo, hi = self._dist().support()
        return float(lo), float(hi)

    def _dlog(self, x):
        raise NotImplementedError

    @property
    def kinks(self) -> np.ndarray:
        return np.empty(0)

    # -- shared handles -----------------------------------------------------
    @property
    def support(self) -> tuple[float, float]:
        """Effective compact support (tails below ``TAIL_MASS`` dropped)."""
        lo, hi = self.natural_support
        d = self._dist()
        if not np.isfinite(lo):
            lo = float(d.ppf(TAIL_MASS))
        if not np.isfinite(hi):
            hi = float(d.isf(TAIL_MASS))
        return lo, hi

    @property
    def breakpoints(self) -> np.ndarray:
        lo, hi = self.support
        k = self.kinks
        return np.concatenate([[lo, hi], k[(k > lo) & (k < hi)]])

    def pdf(self, x):
        return self._dist().pdf(x)

    def logpdf(self, x):
        return self._dist().logpdf(x)

    def cdf(self, x):
        return self._dist().cdf(x)

    def dlogpdf_left(self, x):
        """Left derivative of the log-density (``+inf`` at the lower boundary)."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.natural_support
        out = np.asarray(self._dlog_side(x, left=True), dtype=float)
        out = np.where(x <= lo, np.inf, out)
        return np.where(x > hi, np.nan, out)

    def dlogpdf_right(self, x):
        """Right derivative of the log-density (``-inf`` at the upper boundary)."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.natural_support
        out = np.asarray(self._dlog_side(x, left=False), dtype=float)
        out = np.where(x >= hi, -np.inf, out)
        return np.where(x < lo, np.nan, out)

    def _dlog_side(self, x, left):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._dlog(x)

    @property
    def mode(self) -> float:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return float(self._dist().mean())

    @property
    def var(self) -> float:
        return float(self._dist().var())

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


class Gaussian(_Truth):
    family: Literal["gaussian"] = "gaussian"
    mu: float = 0.0
    sigma: float = Field(default=1.0, gt=0)

    def _dist(self):
        return stats.norm(self.mu, self.sigma)

    def _dlog(self, x):
        return -(x - self.mu) / self.sigma**2

    @property
    def mode(self):
        return self.mu

    def sample(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)


class Gamma(_Truth):
    family: Literal["gamma"] = "gamma"
    shape: float = Field(default=2.0, gt=0)
    rate: float = Field(default=1.0, gt=0)

    @field_validator("shape")
    @classmethod
    def _log_concave_shape(cls, v):
        if v < 1:
            raise ValueError("gamma is log-concave only for shape >= 1")
        return v

    def _dist(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def _dlog(self, x):
        return (self.shape - 1.0) / x - self.rate

    def _dlog_side(self, x, left):
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.shape == 1.0:
                return np.full_like(x, -self.rate)
            return self._dlog(x)

    @property
    def mode(self):
        return (self.shape - 1.0) / self.rate

    def sample(self, rng, n):
        return rng.gamma(self.shape, 1.0 / self.rate, size=n)


class Beta(_Truth):
    family: Literal["beta"] = "beta"
    a: float = Field(default=2.0, ge=1)
    b: float = Field(default=3.0, ge=1)

    def _dist(self):
        return stats.beta(self.a, self.b)

    def _dlog_side(self, x, left):
        with np.errstate(divide="ignore", invalid="ignore"):
            up = 0.0 if self.a == 1.0 else (self.a - 1.0) / x
            down = 0.0 if self.b == 1.0 else (self.b - 1.0) / (1.0 - x)
            return up - down + np.zeros_like(x)

    @property
    def mode(self):
        if self.a == 1.0 and self.b == 1.0:
            return 0.5
        return (self.a - 1.0) / (self.a + self.b - 2.0)

    def sample(self, rng, n):
        return rng.beta(self.a, self.b, size=n)


class Laplace(_Truth):
    family: Literal["laplace"] = "laplace"
    loc: float = 0.0
    scale: float = Field(default=1.0, gt=0)

    def _dist(self):
        return stats.laplace(self.loc, self.scale)

    @property
    def kinks(self):
        return np.array([self.loc])

    def _dlog_side(self, x, left):
        s = np.sign(x - self.loc)
        at = 1.0 if left else -1.0
        return np.where(s == 0, at, -s) / self.scale

    @property
    def mode(self):
        return self.loc

    def sample(self, rng, n):
        return rng.laplace(self.loc, self.scale, size=n)


class Uniform(_Truth):
    family: Literal["uniform"] = "uniform"
    low: float = 0.0
    high: float = 1.0

    @field_validator("high")
    @classmethod
    def _ordered(cls, v, info):
        if v <= info.data.get("low", 0.0):
            raise ValueError("need low < high")
        return v

    def _dist(self):
        return stats.uniform(self.low, self.high - self.low)

    def _dlog_side(self, x, left):
        return np.zeros_like(x)

    @property
    def mode(self):
        return 0.5 * (self.low + self.high)

    def sample(self, rng, n):
        return rng.uniform(self.low, self.high, size=n)


class Mixture2(_Truth):
    """``weight * first + (1 - weight) * second``; not log-concave in general."""

    family: Literal["mixture2"] = "mixture2"
    weight: float = Field(default=0.5, gt=0, lt=1)
    first: "TruthSpec"
    second: "TruthSpec"
    log_concave: ClassVar[bool] = False

    @property
    def natural_support(self):
        a, b = self.first.natural_support, self.second.natural_support
        return min(a[0], b[0]), max(a[1], b[1])

    @property
    def support(self):
        a, b = self.first.support, self.second.support
        return min(a[0], b[0]), max(a[1], b[1])

    @property
    def kinks(self):
        return np.concatenate([self.first.breakpoints, self.second.breakpoints])

    def pdf(self, x):
        return self.weight * self.first.pdf(x) + (1 - self.weight) * self.second.pdf(x)

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x):
        return self.weight * self.first.cdf(x) + (1 - self.weight) * self.second.cdf(x)

    def _dlog_side(self, x, left):
        f1 = self.weight * self.first.pdf(x)
        f2 = (1 - self.weight) * self.second.pdf(x)
        d1 = self.first.dlogpdf_left(x) if left else self.first.dlogpdf_right(x)
        d2 = self.second.dlogpdf_left(x) if left else self.second.dlogpdf_right(x)
        with np.errstate(invalid="ignore"):
            num = np.where(f1 > 0, f1 * d1, 0.0) + np.where(f2 > 0, f2 * d2, 0.0)
            return num / (f1 + f2)

    @property
    def mode(self):
        lo, hi = self.support
        grid = np.linspace(lo, hi, 200001)
        return float(grid[np.argmax(self.pdf(grid))])

    @property
    def mean(self):
        return self.weight * self.first.mean + (1 - self.weight) * self.second.mean

    @property
    def var(self):
        m = self.mean
        w = self.weight
        second_moment = w * (self.first.var + self.first.mean**2) + (1 - w) * (
            self.second.var + self.second.mean**2
        )
        return second_moment - m**2

    def sample(self, rng, n):
        k = int(rng.binomial(n, self.weight))
        return np.concatenate([self.first.sample(rng, k), self.second.sample(rng, n - k)])


TruthSpec = Annotated[
    Union[Gaussian, Gamma, Beta, Laplace, Uniform, Mixture2],
    Field(discriminator="family"),
]
Mixture2.model_rebuild()
_truth_adapter = TypeAdapter(TruthSpec)


def parse_truth(obj: dict) -> _Truth:
    return _truth_adapter.validate_python(obj)


def sample_truth(spec: _Truth, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` sorted draws from ``spec``."""
    return np.sort(np.asarray(spec.sample(rng, n), dtype=float))


def eval_truth(spec: _Truth, x):
    return spec.pdf(x)
