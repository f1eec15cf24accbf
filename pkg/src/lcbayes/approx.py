"""Piecewise log-linear approximation of log-concave densities.

Three layers:

* :func:`midpoint_interpolant` interpolates the interval averages of a
  concave function at interval midpoints (the result is again concave);
* :func:`build_partition` chooses a partition with few, well separated
  points on which that interpolant is uniformly ``O(M (b - a) / m^2)``
  accurate;
* :func:`approximate_density` assembles such partitions over the level
  and slope layers of a truncated log-density and extends the result
  linearly to a prescribed interval.

:func:`plf_to_mixture` rewrites any concave plf in the mixture form used
by the prior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .core import (
    MixtureLogDensity,
    PiecewiseLinearFn,
    ValidationError,
    integrate_pieces,
    log_norm_const,
    normalize,
)

__all__ = [
    "ConcaveFunction",
    "TruthLogDensity",
    "Partition",
    "ApproxReport",
    "midpoint_interpolant",
    "candidate_points",
    "build_partition",
    "plf_to_mixture",
    "fit_envelope",
    "load_constants",
    "approximate_density",
]

KINK_TOL = 1e-12
QUAD_RTOL = 1e-12
# split fractions tried when a midpoint lands on a kink; all keep each part >= 1/3
SPLIT_FRACTIONS = (0.4, 0.6, 0.45, 0.55, 0.35, 0.65, 0.5 - 1 / 7, 0.5 + 1 / 7)
# offsets tried (as fractions of the allowed range) in the thinning steps
OFFSET_FRACTIONS = (0.5, 0.25, 0.75, 0.375, 0.625, 0.125, 0.875)


# -- concave function handles -------------------------------------------------


@dataclass(frozen=True)
class ConcaveFunction:
    """A concave function with one-sided derivative handles and its kinks."""

    fn: Callable
    dleft: Callable
    dright: Callable
    kinks: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __call__(self, x):
        return self.fn(x)

    def left_derivative(self, x):
        return self.dleft(x)

    def right_derivative(self, x):
        return self.dright(x)


class TruthLogDensity:
    """``log f0 - shift`` for a :mod:`lcbayes.data_gen` truth."""

    def __init__(self, truth, shift: float = 0.0):
        self.truth = truth
        self.shift = shift
        self.kinks = np.asarray(truth.kinks, dtype=float)

    def __call__(self, x):
        return self.truth.logpdf(x) - self.shift

    def left_derivative(self, x):
        return self.truth.dlogpdf_left(x)

    def right_derivative(self, x):
        return self.truth.dlogpdf_right(x)


def _kinks_in(w, lo, hi) -> np.ndarray:
    k = np.asarray(getattr(w, "kinks", np.empty(0)), dtype=float)
    return np.sort(k[(k > lo) & (k < hi)])


def _is_kink(w, x, scale) -> bool:
    k = np.asarray(getattr(w, "kinks", np.empty(0)), dtype=float)
    return bool(k.size and np.min(np.abs(k - x)) <= KINK_TOL * scale)


def _dl(w, x) -> float:
    return float(w.left_derivative(x))


def _dr(w, x) -> float:
    return float(w.right_derivative(x))


def _boundary(pred, lo, hi, iters=200):
    """Last point where ``pred`` holds, for ``pred`` true at ``lo``, false at ``hi``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


# -- partitions ---------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """``a = x_0 < ... < x_m = b`` with a red flag per point.

    A red point is the left end of a short interval (length at most twice
    the separation scale of the construction).
    """

    points: np.ndarray
    red_flags: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        r = np.asarray(self.red_flags, dtype=bool)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ValidationError("partition", "points must be strictly increasing with at least two entries")
        if r.shape != x.shape:
            raise ValidationError("partition", "one red flag per point")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "red_flags", r)

    @property
    def m(self) -> int:
        return self.points.size - 1

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    @property
    def min_gap(self) -> float:
        return float(np.min(np.diff(self.points)))

    @classmethod
    def uniform(cls, a: float, b: float, m: int) -> "Partition":
        x = np.linspace(a, b, m + 1)
        return cls(x, np.zeros(x.size, dtype=bool))


def midpoint_interpolant(w, partition: Partition) -> PiecewiseLinearFn:
    """Interpolate interval averages of ``w`` at interval midpoints.

    The value at ``x_i* = (x_{i-1} + x_i) / 2`` is the average of ``w`` over
    ``[x_{i-1}, x_i]`` (adaptive quadrature, relative tolerance 1e-12);
    the first and last pieces are extended linearly to ``a`` and ``b``.
    A single interval gets the chord slope through its average.
    """
    x = partition.points
    a, b = partition.interval
    avg = np.empty(x.size - 1)
    for i in range(avg.size):
        lo, hi = x[i], x[i + 1]
        pts = _kinks_in(w, lo, hi)
        val, _ = integrate.quad(
            lambda t: float(w(t)), lo, hi, points=pts if pts.size else None,
            epsabs=1e-14 * (hi - lo) * (1.0 + abs(float(w(0.5 * (lo + hi))))), epsrel=QUAD_RTOL, limit=200,
        )
        avg[i] = val / (hi - lo)
    if not np.all(np.isfinite(avg)):
        raise ValidationError("quadrature", "interval averages are not finite; is w finite on the partition?")
    mids = 0.5 * (x[1:] + x[:-1])
    if avg.size == 1:
        # one average fixes no slope; the chord keeps lines exact
        s = (float(w(b)) - float(w(a))) / (b - a)
        return PiecewiseLinearFn([a, b], [avg[0] - s * (b - a) / 2, avg[0] + s * (b - a) / 2])
    s0 = (avg[1] - avg[0]) / (mids[1] - mids[0])
    s1 = (avg[-1] - avg[-2]) / (mids[-1] - mids[-2])
    va = avg[0] - s0 * (mids[0] - a)
    vb = avg[-1] + s1 * (b - mids[-1])
    return PiecewiseLinearFn(np.concatenate([[a], mids, [b]]), np.concatenate([[va], avg, [vb]]))


def _slope_range(w, a, b) -> float:
    left, right = _dr(w, a), _dl(w, b)
    if not (np.isfinite(left) and np.isfinite(right)):
        raise ValidationError(
            "derivative",
            f"one-sided derivative at the interval ends is not finite ({left}, {right}); shrink the interval",
        )
    return max(left - right, 0.0)


def _add(points: dict, x: float, red: bool, a: float, b: float):
    if a < x < b:
        points[x] = points.get(x, False) or red


def _pick(lo, hi, ok, fractions=OFFSET_FRACTIONS):
    """First ``lo + f (hi - lo)`` accepted by ``ok``; the middle if none is."""
    for f in fractions:
        s = lo + f * (hi - lo)
        if ok(s):
            return s
    return lo + 0.5 * (hi - lo)


def candidate_points(w, interval: Sequence[float], r: int) -> Partition:
    """Partition points before thinning.

    Starting from the uniform ``r``-grid, adds large kinks with neighbours
    at distance ``delta = (b - a) / r^2``, refines wherever the derivative
    drops by more than ``2M/r`` over an interval (``M = w'_+(a) - w'_-(b)``)
    and splits intervals whose midpoint is a kink. Kinks and their left
    neighbours are coloured red.
    """
    a, b = (float(t) for t in interval)
    if not a < b:
        raise ValidationError("interval", "need a < b")
    if r < 1:
        raise ValidationError("r", "r must be >= 1")
    L = b - a
    M = _slope_range(w, a, b)
    delta = L / r**2
    pts: dict = {}
    for x in np.linspace(a, b, r + 1):
        pts[float(x)] = False
    pts[a] = False
    pts[b] = False

    if M > 0:
        for k in _kinks_in(w, a, b):
            if _dl(w, k) - _dr(w, k) >= M / r:
                _add(pts, float(k), True, a, b)
                _add(pts, float(k - delta), True, a, b)
                _add(pts, float(k + delta), False, a, b)

        # refine where the derivative drops by more than 2M/r across an interval
        limit = 2.0 * M / r
        for _ in range(8 * r + 16):
            xs = sorted(pts)
            added = False
            for x0, x1 in zip(xs[:-1], xs[1:]):
                top = _dr(w, x0)
                if top - _dl(w, x1) <= limit * (1 + 1e-12):
                    continue
                y, _ = _boundary(lambda t: top - _dl(w, t) <= limit, x0, x1)
                if y <= x0:
                    continue
                _add(pts, y, True, a, b)
                _add(pts, y - delta, True, a, b)
                _add(pts, y + delta, False, a, b)
                added = True
                break
            if not added:
                break

    # split intervals whose midpoint is a kink
    xs = sorted(pts)
    for x0, x1 in zip(xs[:-1], xs[1:]):
        if _is_kink(w, 0.5 * (x0 + x1), L):
            def ok(s, x0=x0, x1=x1):
                return not (_is_kink(w, 0.5 * (x0 + s), L) or _is_kink(w, 0.5 * (s + x1), L))
            s = _pick(0.0, 1.0, lambda f: ok(x0 + f * (x1 - x0)), SPLIT_FRACTIONS)
            _add(pts, x0 + s * (x1 - x0), False, a, b)

    xs = sorted(pts)
    return Partition(np.asarray(xs), np.asarray([pts[x] for x in xs]))


def build_partition(w, interval: Sequence[float], r: int) -> Partition:
    """Well separated partition for :func:`midpoint_interpolant`.

    Thins :func:`candidate_points` so that every gap is at least
    ``(b - a) / (2 r^2)``.

    Parameters
    ----------
    w
        Concave function with ``left_derivative``, ``right_derivative``
        and a ``kinks`` array.
    interval : (a, b)
    r : int
        Resolution; the output has between ``r`` and ``14 r + 1`` intervals.
    """
    cand = candidate_points(w, interval, r)
    a, b = cand.interval
    pts = dict(zip(cand.points.tolist(), cand.red_flags.tolist()))
    return _thin(w, pts, a, b, (b - a) / r**2)


def _thin(w, pts: dict, a: float, b: float, delta: float) -> Partition:
    L = b - a
    xs = sorted(pts)
    red = dict(pts)
    out = [a]
    xt = a
    i = 1  # xs[i] is the first candidate right of xt
    while True:
        if b - xt <= delta:
            break
        j = i
        while xs[j] <= xt + delta:
            j += 1
        y = xs[j]
        if j > i:
            # points in (xt, xt + delta] are dropped; a replacement goes just past xt + delta
            room = min(delta, y - xt - delta)
            s = _pick(
                xt + delta, xt + delta + room,
                lambda s: not (_is_kink(w, 0.5 * (s + y), L) or _is_kink(w, 0.5 * (s + xt), L)),
            )
            red[xt] = True
            red[s] = False
            out.append(s)
            xt = s
            i = j
        else:
            out.append(y)
            xt = y
            i = j + 1
    if xt != b and len(out) == 1:
        out.append(b)
    elif xt != b:
        out.pop()
        y = out[-1]
        if b - y > 2 * delta:
            room = min(b - y - 2 * delta, delta)
            s = _pick(
                b - delta - room, b - delta,
                lambda s: not (_is_kink(w, 0.5 * (y + s), L) or _is_kink(w, 0.5 * (s + b), L)),
            )
            red[s] = True
        else:
            s = 0.5 * (y + b)
            red[y] = True
            red[s] = True
        out.extend([s, b])
    flags = [bool(red.get(x, False)) for x in out]
    flags[-1] = False
    return Partition(np.asarray(out), np.asarray(flags))


# -- mixture representation ------------------------------------------------------


def plf_to_mixture(w: PiecewiseLinearFn, tol: float = 1e-12) -> tuple[MixtureLogDensity, float]:
    """Write a concave plf as ``W + gamma3`` with ``W`` in mixture form.

    Knots sit at the interior breakpoints where the slope drops; the drop
    times the knot position, normalized, gives the weights. Returns the
    mixture and the additive constant ``gamma3 = w(a)``.
    """
    x, s = w.breakpoints, w.slopes
    a, b = w.support
    drops = -np.diff(s)
    scale = 1.0 + np.abs(s[:-1]) + np.abs(s[1:])
    if np.any(drops < -1e-9 * scale):
        raise ValidationError("concavity", "plf_to_mixture needs a concave plf")
    drops = np.where(drops > tol * scale, drops, 0.0)
    z = x[1:-1] - a
    mass = z * drops
    gamma1 = float(mass.sum())
    gamma2 = float(-s[-1]) + 0.0
    keep = mass > 0
    if gamma1 > 0 and np.any(keep):
        knots, weights = z[keep], mass[keep] / gamma1
        weights = weights / weights.sum()
    else:
        gamma1 = 0.0
        knots, weights = np.array([b - a]), np.array([1.0])
    return MixtureLogDensity((a, b), knots, weights, gamma1, gamma2), float(w.values[0])


# -- constructive approximation ----------------------------------------------------


def fit_envelope(truth, alphas: Optional[np.ndarray] = None, grid_size: int = 20001) -> tuple[float, float]:
    """Envelope ``f0(x) <= exp(beta - alpha |x|)`` minimizing ``e^beta / alpha``.

    ``beta(alpha) = max_x (log f0(x) + alpha |x|)`` on a dense grid over the
    effective support; alpha by grid search refined with a bounded scalar
    minimization.
    """
    lo, hi = truth.support
    x = np.linspace(lo, hi, grid_size)
    with np.errstate(divide="ignore"):
        lf = truth.logpdf(x)
    ok = np.isfinite(lf)
    x, lf = x[ok], lf[ok]
    ax = np.abs(x)

    def beta(al):
        return float(np.max(lf + al * ax))

    def crit(al):
        return beta(al) - math.log(al)

    if alphas is None:
        alphas = np.geomspace(1e-3, 1e2, 400)
    vals = np.array([crit(al) for al in alphas])
    k = int(np.argmin(vals))
    lo_a = alphas[max(k - 1, 0)]
    hi_a = alphas[min(k + 1, alphas.size - 1)]
    res = optimize.minimize_scalar(crit, bounds=(lo_a, hi_a), method="bounded", options={"xatol": 1e-10})
    al = float(res.x) if res.fun <= vals[k] else float(alphas[k])
    return al, beta(al)


def load_constants() -> dict:
    """Frozen constants for the approximation report (package fixture)."""
    text = resources.files("lcbayes").joinpath("fixtures/approx_constants.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ApproxReport:
    """Approximation ``f_bar`` of a log-concave ``f0`` and its property checks.

    ``plf`` is the normalized log-density ``log f_bar`` on ``[a_n, b_n]``.
    ``properties`` holds the five checks: knot count, knot separation,
    exact support, pointwise domination and the Hellinger bound.
    """

    plf: PiecewiseLinearFn
    knot_count: int
    min_knot_gap: float
    sup_error_on_B: float
    hellinger_sq: float
    gamma1: float
    gamma2: float
    gamma3: float
    knots: np.ndarray
    weights: np.ndarray
    n: int
    interval: tuple[float, float]
    core_interval: tuple[float, float]
    alpha: float
    beta: float
    domination_ratio: float
    bounds: dict
    properties: dict
    mixture_bounds_ok: bool

    @property
    def all_hold(self) -> bool:
        return all(self.properties.values())

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "interval": list(self.interval),
            "core_interval": list(self.core_interval),
            "alpha": self.alpha,
            "beta": self.beta,
            "knot_count": self.knot_count,
            "min_knot_gap": self.min_knot_gap,
            "sup_error_on_B": self.sup_error_on_B,
            "hellinger_sq": self.hellinger_sq,
            "domination_ratio": self.domination_ratio,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "knots": self.knots.tolist(),
            "weights": self.weights.tolist(),
            "bounds": self.bounds,
            "properties": self.properties,
            "mixture_bounds_ok": self.mixture_bounds_ok,
            "plf": self.plf.to_dict(),
        }


def _snap(x, target, scale):
    return target if abs(x - target) <= KINK_TOL * scale else x


def _core_interval(w1, lo, hi, mode, level, K):
    """``B = {w1 >= level, |w1'| <= K}`` as ``[L, R]`` (its closure)."""
    scale = hi - lo
    if not w1(mode) >= level:
        raise ValidationError("n", "the level set is empty; increase n")

    def left_ok(t):
        return w1(t) >= level and _dl(w1, t) <= K

    def right_ok(t):
        return w1(t) >= level and _dr(w1, t) >= -K

    L = lo
    if not left_ok(lo):
        _, L = _boundary(lambda t: not left_ok(t), lo, mode)
        L = _snap(L, lo, scale)
    R = hi
    if not right_ok(hi):
        R, _ = _boundary(right_ok, mode, hi)
        R = _snap(R, hi, scale)
    return L, R


def _layer_pieces(w1, L, R, K, j_max):
    """Cut ``[L, R]`` where ``|w1'|`` crosses ``2^-j K``, j = 1..j_max+1."""
    scale = R - L
    cuts = {L, R}
    for j in range(1, j_max + 2):
        t = K * 2.0**-j
        if _dr(w1, L) > t:
            _, c = _boundary(lambda x: _dr(w1, x) > t, L, R)
            cuts.add(_snap(_snap(c, L, scale), R, scale))
        if _dl(w1, R) < -t:
            c, _ = _boundary(lambda x: _dl(w1, x) >= -t, L, R)
            cuts.add(_snap(_snap(c, L, scale), R, scale))
    return sorted(c for c in cuts if L <= c <= R)


def _piece_size(w1, u, v, n, K, j_max, D):
    logn = math.log(n)
    mid = 0.5 * (u + v)
    slope = max(abs(_dl(w1, mid)), abs(_dr(w1, mid)))
    length = v - u
    if slope <= K * 2.0 ** -(j_max + 1):
        return max(1, math.ceil(n**0.2 * math.sqrt(D * length / logn)))
    j = min(max(int(math.floor(math.log2(K / slope))), 0), j_max)
    return max(1, math.ceil(2.0 ** (-j / 2) * n**0.6 * math.sqrt(length) / math.sqrt(logn)))


def _merge_small(cuts, min_len):
    """Drop cut points that leave a piece shorter than ``min_len``."""
    cuts = list(cuts)
    changed = True
    while changed and len(cuts) > 2:
        changed = False
        lengths = np.diff(cuts)
        k = int(np.argmin(lengths))
        if lengths[k] < min_len:
            # remove the inner endpoint shared with the longer neighbour
            if k == 0:
                del cuts[1]
            elif k == len(lengths) - 1:
                del cuts[-2]
            elif lengths[k - 1] >= lengths[k + 1]:
                del cuts[k]
            else:
                del cuts[k + 1]
            changed = True
    return cuts


def _steep_breaks(w: PiecewiseLinearFn) -> np.ndarray:
    """Geometric nodes near the high end of steep plf segments.

    A segment with slope ``s`` carries its mass within a few ``1/|s|`` of
    its upper end; composite Simpson needs nodes at that scale.
    """
    out = []
    offsets = 2.0 ** np.arange(-2, 31)
    for lo, hi, s in zip(w.breakpoints[:-1], w.breakpoints[1:], w.slopes):
        if abs(s) * (hi - lo) <= 10.0:
            continue
        d = offsets / abs(s)
        d = d[d < hi - lo]
        out.append(hi - d if s > 0 else lo + d)
    return np.concatenate(out) if out else np.empty(0)


def _hellinger_sq(f0, f_bar, w_bar: PiecewiseLinearFn) -> float:
    """``int (sqrt f0 - sqrt f_bar)^2`` (no factor 1/2)."""
    lo = min(f0.support[0], f_bar.support[0])
    hi = max(f0.support[1], f_bar.support[1])
    breaks = np.concatenate([[lo, hi], f0.breakpoints, w_bar.breakpoints, _steep_breaks(w_bar)])
    breaks = breaks[(breaks >= lo) & (breaks <= hi)]

    def integrand(x):
        return (np.sqrt(f0.pdf(x)) - np.sqrt(f_bar.pdf(x))) ** 2

    return float(integrate_pieces(integrand, breaks))


def approximate_density(
    f0,
    interval: Optional[Sequence[float]] = None,
    n: int = 10_000,
    constants: Optional[dict] = None,
    grid_size: int = 10_000,
) -> ApproxReport:
    """Piecewise log-linear approximation of a log-concave truth.

    Parameters
    ----------
    f0
        A :mod:`lcbayes.data_gen` truth (log-concave).
    interval : (a_n, b_n), optional
        Must contain ``[-(8/(5 alpha)) log n, (8/(5 alpha)) log n]``;
        defaults to exactly that interval.
    n : int
        Sample size driving the resolution; at least ``constants["n0"]``.
    constants : dict, optional
        ``C_knots, c_gap, C_dom, C_hellinger, D, n0``; defaults to the
        frozen package fixture.
    grid_size : int
        Points of the domination and sup-error grids.
    """
    if not getattr(f0, "log_concave", False):
        raise ValidationError("f0", "approximate_density needs a log-concave truth")
    const = dict(load_constants() if constants is None else constants)
    n0 = int(const.get("n0", 1000))
    if n < n0:
        raise ValidationError("n", f"n = {n} is below n0 = {n0}")
    D = float(const.get("D", 1.0))
    logn = math.log(n)
    K = n**0.8

    alpha, beta = fit_envelope(f0)
    half = 8.0 / (5.0 * alpha) * logn
    if interval is None:
        interval = (-half, half)
    a_n, b_n = (float(t) for t in interval)
    if a_n > -half or b_n < half:
        raise ValidationError("interval", f"[a_n, b_n] must contain [{-half:.6g}, {half:.6g}]")

    # truncate to [-s_n, s_n] and renormalize
    s_n = 4.0 / (5.0 * alpha) * logn
    nat_lo, nat_hi = f0.natural_support
    lo, hi = max(-s_n, nat_lo), min(s_n, nat_hi)
    mass = float(f0.cdf(hi) - f0.cdf(lo))
    w1 = TruthLogDensity(f0, shift=math.log(mass))
    mode = min(max(f0.mode, lo), hi)

    L, R = _core_interval(w1, lo, hi, mode, -0.8 * logn, K)
    j_max = max(math.ceil(math.log2(K / D)) - 1, 0)
    cuts = _layer_pieces(w1, L, R, K, j_max)
    # a cut on a kink would hide the kink from the partition refinement
    cuts = [c for c in cuts if c in (L, R) or not _is_kink(w1, c, R - L)]
    cuts = _merge_small(cuts, 0.5 * logn * n**-1.2)

    points = [cuts[0]]
    for u, v in zip(cuts[:-1], cuts[1:]):
        r = _piece_size(w1, u, v, n, K, j_max, D)
        part = build_partition(w1, (u, v), r)
        points.extend(part.points[1:].tolist())
    partition = Partition(np.asarray(points), np.zeros(len(points), dtype=bool))
    inner = midpoint_interpolant(w1, partition)

    # linear extension to [a_n, b_n] with clipped slopes
    bp = inner.breakpoints.tolist()
    vals = inner.values.tolist()
    if a_n < L:
        sl = float(np.clip(_dl(w1, L), -K, K))
        bp.insert(0, a_n)
        vals.insert(0, vals[0] - sl * (L - a_n))
    if R < b_n:
        sr = float(np.clip(_dr(w1, R), -K, K))
        bp.append(b_n)
        vals.append(vals[-1] + sr * (b_n - R))
    w_bar = PiecewiseLinearFn(bp, vals)
    w_bar = PiecewiseLinearFn(w_bar.breakpoints, w_bar.values - log_norm_const(w_bar))
    f_bar = normalize(w_bar)

    knot_count = int(w_bar.breakpoints.size - 2)
    min_gap = float(np.min(np.diff(w_bar.breakpoints)))
    grid_B = np.union1d(np.linspace(L, R, grid_size), partition.points)
    sup_err = float(np.max(np.abs(inner(grid_B) - w1(grid_B))))
    h2 = _hellinger_sq(f0, f_bar, w_bar)

    grid = np.linspace(a_n, b_n, grid_size)
    f0_vals = f0.pdf(grid)
    fb_vals = f_bar.pdf(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(f0_vals > 0, f0_vals / fb_vals, 0.0)
    dom = float(np.max(ratio))

    mix, gamma3 = plf_to_mixture(w_bar)
    width = b_n - a_n
    bounds = {
        "knot_count": float(const["C_knots"]) * n**0.2 * logn,
        "min_knot_gap": float(const["c_gap"]) * n**-1.2 * logn,
        "domination": float(const["C_dom"]),
        "hellinger_sq": float(const["C_hellinger"]) * (logn**2 * n**-0.8 + width**2 * n**-1.6),
    }
    properties = {
        "knot_count": knot_count <= bounds["knot_count"],
        "knot_separation": min_gap >= bounds["min_knot_gap"],
        "support": w_bar.support == (a_n, b_n),
        "domination": dom <= bounds["domination"],
        "hellinger": h2 <= bounds["hellinger_sq"],
    }
    mixture_ok = (0.0 <= mix.gamma1 <= 2.0 * width * K) and abs(mix.gamma2) <= K
    return ApproxReport(
        plf=w_bar,
        knot_count=knot_count,
        min_knot_gap=min_gap,
        sup_error_on_B=sup_err,
        hellinger_sq=float(h2),
        gamma1=mix.gamma1,
        gamma2=mix.gamma2,
        gamma3=gamma3,
        knots=mix.knots.copy(),
        weights=mix.weights.copy(),
        n=int(n),
        interval=(a_n, b_n),
        core_interval=(float(L), float(R)),
        alpha=alpha,
        beta=beta,
        domination_ratio=dom,
        bounds=bounds,
        properties=properties,
        mixture_bounds_ok=bool(mixture_ok),
    )
