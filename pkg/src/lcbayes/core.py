"""Piecewise log-linear densities on compact intervals.

Everything downstream (priors, sampler, MLE, approximation) represents a
log-density as a :class:`PiecewiseLinearFn`; this module normalizes,
evaluates, samples and compares such densities exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

__all__ = [
    "LogConcaveError",
    "ValidationError",
    "NumericError",
    "DataError",
    "PiecewiseLinearFn",
    "MixtureLogDensity",
    "NormalizedDensity",
    "GridDensity",
    "mixture_to_plf",
    "log_norm_const",
    "normalize",
    "eval_density",
    "sample",
    "hellinger",
    "mode_of",
    "log_segment_integrals",
]

SMALL_SLOPE = 1e-8
DEDUP_TOL = 1e-12
SIMPSON_PANELS = 4096
SIMPSON_TOL = 1e-10


class LogConcaveError(Exception):
    """Base class for all package errors."""


class ValidationError(LogConcaveError, ValueError):
    """An input violates a documented invariant.

    ``invariant`` names the failed check so callers can report it.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class DataError(LogConcaveError, ValueError):
    """Observed data are unusable (empty, degenerate or outside the support)."""


class NumericError(LogConcaveError, ArithmeticError):
    """A computation produced non-finite values."""


def _log_expm1_ratio(d):
    """log((e^d - 1)/d), elementwise, with the small-|d| series branch."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < SMALL_SLOPE
    pos = (d > 0) & ~small
    neg = (d < 0) & ~small
    out[small] = np.log1p(d[small] / 2.0)
    dp = d[pos]
    out[pos] = dp + np.log(-np.expm1(-dp)) - np.log(dp)
    dn = d[neg]
    out[neg] = np.log(-np.expm1(dn)) - np.log(-dn)
    return out


def _logsumexp(v):
    m = np.max(v)
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(v - m)))


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function on ``[breakpoints[0], breakpoints[-1]]``.

    Parameters
    ----------
    breakpoints : array-like, shape (K+1,)
        Strictly increasing, at least two points; includes both endpoints.
    values : array-like, shape (K+1,)
        Finite function values at the breakpoints.
    concave : bool, default False
        If True, the constructor additionally rejects increasing slopes.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    concave: bool = False

    def __post_init__(self):
        x = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValidationError("breakpoints", "need at least two breakpoints")
        if v.shape != x.shape:
            raise ValidationError("values", "values and breakpoints differ in length")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise ValidationError("breakpoints", "must be finite and strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values", "all values must be finite")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", v)
        if self.concave and not self.is_concave():
            raise ValidationError("concavity", "slopes must be non-increasing")

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def is_concave(self, tol: float = 1e-9) -> bool:
        """Non-increasing slopes, up to ``tol`` and the rounding of the values.

        A slope over a short piece inherits an error of about
        ``eps * |v| / dx`` from its end values, so that much slack is
        allowed on top of the relative tolerance.
        """
        s = self.slopes
        if s.size < 2:
            return True
        scale = 1.0 + np.abs(s[:-1]) + np.abs(s[1:])
        v = np.abs(self.values)
        dx = np.diff(self.breakpoints)
        rounding = 4.0 * np.finfo(float).eps * (v[:-1] + v[1:]) / dx
        slack = rounding[:-1] + rounding[1:]
        return bool(np.all(np.diff(s) <= tol * scale + slack))

    def __call__(self, x):
        """Evaluate by linear interpolation; ``-inf`` outside the support."""
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.breakpoints, self.values)
        lo, hi = self.support
        out = np.where((x < lo) | (x > hi), -np.inf, out)
        return out if out.ndim else float(out)

    def left_derivative(self, x):
        x = np.asarray(x, dtype=float)
        s = self.slopes
        j = np.clip(np.searchsorted(self.breakpoints, x, side="left") - 1, 0, s.size - 1)
        return s[j]

    def right_derivative(self, x):
        x = np.asarray(x, dtype=float)
        s = self.slopes
        j = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, s.size - 1)
        return s[j]

    @property
    def kinks(self) -> np.ndarray:
        """Interior breakpoints where the slope actually changes."""
        s = self.slopes
        change = np.abs(np.diff(s)) > 1e-12 * (1.0 + np.abs(s[:-1]))
        return self.breakpoints[1:-1][change]

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class MixtureLogDensity:
    """Mixture parameterization of a concave log-density on ``[a, b]``.

    ``W(x) = gamma1 * sum_i p_i * min(theta_i, x - a) / theta_i - gamma2 * (x - a)``
    """

    support: tuple[float, float]
    knots: np.ndarray
    weights: np.ndarray
    gamma1: float
    gamma2: float

    def __post_init__(self):
        a, b = (float(t) for t in self.support)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValidationError("support", f"need finite a < b, got [{a}, {b}]")
        theta = np.array(self.knots, dtype=float).ravel()
        p = np.array(self.weights, dtype=float).ravel()
        if theta.size < 1:
            raise ValidationError("knots", "N >= 1 required")
        if p.shape != theta.shape:
            raise ValidationError("weights", "one weight per knot")
        if np.any(~(theta > 0)) or np.any(theta > (b - a) * (1 + 1e-12)):
            raise ValidationError("knots", "every knot must lie in (0, b - a]")
        if np.any(~(p >= 0)):
            raise ValidationError("weights", "weights must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError("weights", f"weights sum to {p.sum()!r}, not 1")
        if not (np.isfinite(self.gamma1) and self.gamma1 >= 0):
            raise ValidationError("gamma1", "gamma1 must be finite and >= 0")
        if not np.isfinite(self.gamma2):
            raise ValidationError("gamma2", "gamma2 must be finite")
        theta = np.minimum(theta, b - a)
        theta.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "support", (a, b))
        object.__setattr__(self, "knots", theta)
        object.__setattr__(self, "weights", p)
        object.__setattr__(self, "gamma1", float(self.gamma1))
        object.__setattr__(self, "gamma2", float(self.gamma2))

    @property
    def n_knots(self) -> int:
        return self.knots.size

    def __call__(self, x):
        """Closed-form W(x); defined on the support only."""
        a, _ = self.support
        x = np.asarray(x, dtype=float)
        t = (x - a)[..., None]
        ramp = np.minimum(self.knots, t) / self.knots
        out = self.gamma1 * ramp @ self.weights - self.gamma2 * (x - a)
        return out if np.ndim(out) else float(out)


def mixture_to_plf(m: MixtureLogDensity) -> PiecewiseLinearFn:
    """Evaluate W at ``{a} U {a + theta_i} U {b}`` and return it as a plf.

    Knots closer than ``1e-12`` (relative to the support width) are merged.
    """
    a, b = m.support
    width = b - a
    order = np.argsort(m.knots, kind="stable")
    theta = m.knots[order]
    p = m.weights[order]
    # W(a + t) = gamma1 * (sum_{theta_i <= t} p_i + t * sum_{theta_i > t} p_i / theta_i) - gamma2 * t
    ratio_tail = np.concatenate([np.cumsum((p / theta)[::-1])[::-1], [0.0]])
    cum_p = np.concatenate([[0.0], np.cumsum(p)])
    t_all = np.concatenate([[0.0], theta, [width]])
    j = np.minimum(np.arange(t_all.size), theta.size)
    vals = m.gamma1 * (cum_p[j] + t_all * ratio_tail[j]) - m.gamma2 * t_all
    vals[0] = 0.0
    tol = DEDUP_TOL * width
    keep = np.zeros(t_all.size, dtype=bool)
    keep[0] = keep[-1] = True
    last = 0.0
    for k in range(1, t_all.size - 1):
        if t_all[k] - last > tol and width - t_all[k] > tol:
            keep[k] = True
            last = t_all[k]
    idx = np.flatnonzero(keep)
    x = a + t_all[idx]
    x[-1] = b  # a + (b - a) can round below b
    return PiecewiseLinearFn(x, vals[idx])


def log_segment_integrals(w: PiecewiseLinearFn) -> np.ndarray:
    """log of int_{x_j}^{x_{j+1}} exp(w) for every segment, in closed form."""
    dx = np.diff(w.breakpoints)
    dv = np.diff(w.values)
    return np.log(dx) + w.values[:-1] + _log_expm1_ratio(dv)


def log_norm_const(w: PiecewiseLinearFn) -> float:
    """log of the integral of ``exp(w)`` over its support.

    Segment integrals ``e^{w_j} (e^{s_j dx} - 1) / s_j`` are combined in log
    space, so no intermediate overflows.
    """
    return float(_logsumexp(log_segment_integrals(w)))


@dataclass(frozen=True)
class NormalizedDensity:
    """``exp(logdensity - log_norm)`` on the plf support, zero elsewhere."""

    logdensity: PiecewiseLinearFn
    log_norm: float
    _seg_log_mass: np.ndarray = field(init=False, repr=False, compare=False)
    _cum_mass: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seg = log_segment_integrals(self.logdensity) - self.log_norm
        cum = np.concatenate([[0.0], np.cumsum(np.exp(seg))])
        object.__setattr__(self, "_seg_log_mass", seg)
        object.__setattr__(self, "_cum_mass", cum)

    @property
    def support(self) -> tuple[float, float]:
        return self.logdensity.support

    @property
    def breakpoints(self) -> np.ndarray:
        return self.logdensity.breakpoints

    def logpdf(self, x):
        return self.logdensity(x) - self.log_norm

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(np.asarray(self.logpdf(x)))
        return out if out.ndim else float(out)

    def cdf(self, x):
        """Closed-form CDF; exact piecewise-exponential integration."""
        x = np.asarray(x, dtype=float)
        bp, vals, s = self.logdensity.breakpoints, self.logdensity.values, self.logdensity.slopes
        xc = np.clip(x, bp[0], bp[-1])
        j = np.clip(np.searchsorted(bp, xc, side="right") - 1, 0, s.size - 1)
        t = xc - bp[j]
        with np.errstate(divide="ignore"):
            partial = np.where(
                t > 0,
                np.exp(vals[j] - self.log_norm + np.log(np.where(t > 0, t, 1.0)) + _log_expm1_ratio(s[j] * t)),
                0.0,
            )
        out = np.clip(self._cum_mass[j] + partial, 0.0, 1.0)
        out = np.where(x >= bp[-1], 1.0, out)
        return out if out.ndim else float(out)

    def ppf(self, u):
        """Inverse CDF, solved analytically within each log-linear segment."""
        u = np.asarray(u, dtype=float)
        bp, s = self.logdensity.breakpoints, self.logdensity.slopes
        total = self._cum_mass[-1]
        target = np.clip(u, 0.0, 1.0) * total
        j = np.clip(np.searchsorted(self._cum_mass, target, side="right") - 1, 0, s.size - 1)
        seg_mass = np.exp(self._seg_log_mass[j])
        frac = np.clip((target - self._cum_mass[j]) / seg_mass, 0.0, 1.0)
        dx = bp[j + 1] - bp[j]
        out = bp[j] + _invert_segment(frac, s[j], dx)
        out = np.clip(out, bp[0], bp[-1])
        return out if out.ndim else float(out)


def _invert_segment(frac, slope, dx):
    """Solve (e^{s t} - 1) / (e^{s dx} - 1) = frac for t in [0, dx]."""
    frac, slope, dx = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (frac, slope, dx)))
    d = slope * dx
    out = np.empty(frac.shape)
    small = np.abs(d) < SMALL_SLOPE
    pos = (d > 0) & ~small
    neg = (d < 0) & ~small
    out[small] = frac[small] * dx[small] * (1.0 + d[small] * (1.0 - frac[small]) / 2.0)
    # d > 0: t = dx + log(u + (1-u) e^{-d}) / s avoids overflow of e^{d}
    fp, dp, sp = frac[pos], d[pos], slope[pos]
    out[pos] = dx[pos] + np.log(fp + (1.0 - fp) * np.exp(-dp)) / sp
    fn, dn, sn = frac[neg], d[neg], slope[neg]
    out[neg] = np.log1p(fn * np.expm1(dn)) / sn
    return out


def normalize(w: PiecewiseLinearFn) -> NormalizedDensity:
    return NormalizedDensity(w, log_norm_const(w))


def eval_density(d: NormalizedDensity, x):
    """Density value(s) at ``x``; exactly zero outside the support."""
    return d.pdf(x)


def sample(d: NormalizedDensity, rng: np.random.Generator, count: int) -> np.ndarray:
    if count < 0:
        raise ValidationError("count", "count must be >= 0")
    if count == 0:
        return np.empty(0)
    return np.atleast_1d(d.ppf(rng.random(count)))


class Evaluable(Protocol):
    """Anything :func:`hellinger` can integrate."""

    @property
    def support(self) -> tuple[float, float]: ...

    @property
    def breakpoints(self) -> np.ndarray: ...

    def pdf(self, x): ...


@dataclass(frozen=True)
class GridDensity:
    """Linear interpolation of density values on a grid; zero off the grid.

    Used for posterior-mean curves, which need not be log-concave.
    """

    grid: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        f = np.asarray(self.density, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValidationError("grid", "grid must be strictly increasing with >= 2 points")
        if f.shape != g.shape or np.any(f < 0) or not np.all(np.isfinite(f)):
            raise ValidationError("density", "need finite non-negative values on the grid")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", f)

    @property
    def support(self):
        return float(self.grid[0]), float(self.grid[-1])

    @property
    def breakpoints(self):
        return self.grid

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.grid, self.density, left=0.0, right=0.0)
        return out if out.ndim else float(out)


def _simpson(fn: Callable, lo: float, hi: float, panels: int) -> float:
    x = np.linspace(lo, hi, 2 * panels + 1)
    # one-sided limits at the ends, so jumps at breakpoints do not leak in
    x[0] = np.nextafter(lo, hi)
    x[-1] = np.nextafter(hi, lo)
    y = fn(x)
    h = (hi - lo) / (2 * panels)
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def integrate_pieces(
    fn: Callable,
    breaks: Sequence[float],
    panels: int = SIMPSON_PANELS,
    tol: float = SIMPSON_TOL,
    max_doublings: int = 8,
) -> float:
    """Composite Simpson over consecutive breaks with panel doubling.

    ``panels`` are distributed over pieces in proportion to their length; each
    piece is refined independently until successive estimates agree to
    ``tol`` (absolute, scaled by the piece's share of the total length).
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    total_len = breaks[-1] - breaks[0]
    acc = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        share = (hi - lo) / total_len
        k = max(2, int(np.ceil(panels * share)))
        prev = _simpson(fn, lo, hi, k)
        for _ in range(max_doublings):
            k *= 2
            cur = _simpson(fn, lo, hi, k)
            done = abs(cur - prev) <= tol * max(share, 1e-3)
            prev = cur
            if done:
                break
        acc += prev
    return acc


def hellinger(
    f: Evaluable,
    g: Evaluable,
    panels: int = SIMPSON_PANELS,
    tol: float = SIMPSON_TOL,
    convention: str = "half",
) -> float:
    """Hellinger distance between two densities.

    ``convention="half"`` (default) gives ``(1/2 int (sqrt f - sqrt g)^2)^{1/2}``,
    bounded by 1; ``"full"`` drops the 1/2 and is bounded by ``sqrt 2``. The
    integral runs over the union of both supports, split at every breakpoint
    of either density so the integrand is smooth on each piece.
    """
    if convention not in ("half", "full"):
        raise ValidationError("convention", "use 'half' or 'full'")
    lo = min(f.support[0], g.support[0])
    hi = max(f.support[1], g.support[1])
    breaks = np.concatenate([[lo, hi], f.support, g.support, f.breakpoints, g.breakpoints])
    breaks = breaks[(breaks >= lo) & (breaks <= hi)]

    def integrand(x):
        fx = np.asarray(f.pdf(x), dtype=float)
        gx = np.asarray(g.pdf(x), dtype=float)
        if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(gx))):
            raise NumericError("non-finite density value inside the quadrature range")
        return (np.sqrt(np.maximum(fx, 0)) - np.sqrt(np.maximum(gx, 0))) ** 2

    h2 = integrate_pieces(integrand, breaks, panels=panels, tol=tol)
    if convention == "half":
        return float(np.sqrt(np.clip(0.5 * h2, 0.0, 1.0)))
    return float(np.sqrt(np.clip(h2, 0.0, 2.0)))


def mode_of(w: PiecewiseLinearFn) -> float:
    """Argmax of a concave plf; midpoint of the maximal flat stretch on ties."""
    if not w.is_concave():
        raise ValidationError("concavity", "mode_of needs a concave log-density")
    v = w.values
    top = v.max()
    tied = np.flatnonzero(v >= top - 1e-12 * (1.0 + abs(top)))
    # concavity makes the tied breakpoints contiguous
    return float(0.5 * (w.breakpoints[tied[0]] + w.breakpoints[tied[-1]]))
