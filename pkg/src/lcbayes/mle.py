"""Log-concave maximum likelihood estimator.

Maximizes ``(1/n) sum_i phi(X_i) - int exp(phi) + 1`` over concave
functions ``phi`` that are linear between consecutive distinct
observations. The unknowns are ``u = (phi_1, s_1, ..., s_{m-1})`` with
slopes ``s_j`` that must be non-increasing.

Two kinds of step alternate, each with Armijo backtracking so the
objective never decreases:

* a Newton step restricted to the current face (runs of equal slopes move
  together), projected back onto decreasing slopes;
* a projected gradient step, ``s_j += t * sum_{k>j} dL/dphi_k``, with the
  decreasing isotonic projection weighted by the spacings. This is the
  step that can open new kinks.

Convergence is declared when the projected gradient map moves ``u`` by at
most ``tol`` in the sup norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .core import DataError, Evaluable, NormalizedDensity, PiecewiseLinearFn, hellinger, log_norm_const

__all__ = ["MleResult", "logconcave_mle", "hellinger_to_truth", "integral_terms"]

SERIES_CUTOFF = 1.0
SERIES_TERMS = 25
ARMIJO = 1e-4


@dataclass(frozen=True)
class MleResult:
    """Fitted log-density (normalized), the objective after every accepted
    step, and whether the stationarity tolerance was reached."""

    plf: PiecewiseLinearFn
    objective_trace: np.ndarray
    converged: bool
    iterations: int = 0
    gradient_norm: float = np.nan
    density: NormalizedDensity = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "density", NormalizedDensity(self.plf, log_norm_const(self.plf)))

    @property
    def support(self):
        return self.plf.support

    @property
    def breakpoints(self):
        return self.plf.breakpoints

    def pdf(self, x):
        return self.density.pdf(x)


def _g_functions(d):
    """``g_k(d) = int_0^1 t^k e^{d t} dt`` for k = 0, 1, 2."""
    d = np.asarray(d, dtype=float)
    g = np.empty((3,) + d.shape)
    small = np.abs(d) < SERIES_CUTOFF
    ds = d[small]
    term = np.ones_like(ds)
    acc = np.zeros((3,) + ds.shape)
    for j in range(SERIES_TERMS):
        if j:
            term = term * ds / j
        for k in range(3):
            acc[k] += term / (j + k + 1)
    g[:, small] = acc
    dl = d[~small]
    e = np.exp(dl)
    g[0, ~small] = np.expm1(dl) / dl
    g[1, ~small] = (e * (dl - 1.0) + 1.0) / dl**2
    g[2, ~small] = (e * (dl * dl - 2.0 * dl + 2.0) - 2.0) / dl**3
    return g


def integral_terms(r, s):
    """``J(r, s) = int_0^1 exp((1-t) r + t s) dt`` and its derivatives.

    Returns ``J, J_r, J_s, J_rr, J_rs, J_ss``. The expansion is taken
    around the larger endpoint so nothing overflows.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    swap = s > r
    hi = np.where(swap, s, r)
    lo = np.where(swap, r, s)
    g0, g1, g2 = _g_functions(lo - hi)
    e = np.exp(hi)
    J = e * g0
    J_hi = e * (g0 - g1)
    J_lo = e * g1
    J_hihi = e * (g0 - 2.0 * g1 + g2)
    J_hilo = e * (g1 - g2)
    J_lolo = e * g2
    J_r = np.where(swap, J_lo, J_hi)
    J_s = np.where(swap, J_hi, J_lo)
    J_rr = np.where(swap, J_lolo, J_hihi)
    J_ss = np.where(swap, J_hihi, J_lolo)
    return J, J_r, J_s, J_rr, J_hilo, J_ss


class _Problem:
    def __init__(self, x, weights):
        self.x = x
        self.dx = np.diff(x)
        self.w = weights

    def phi(self, u):
        return u[0] + np.concatenate([[0.0], np.cumsum(self.dx * u[1:])])

    def value(self, phi):
        J = integral_terms(phi[:-1], phi[1:])[0]
        return float(self.w @ phi - self.dx @ J + 1.0)

    def grad_hess(self, phi):
        _, J_r, J_s, J_rr, J_rs, J_ss = integral_terms(phi[:-1], phi[1:])
        g = self.w.copy()
        g[:-1] -= self.dx * J_r
        g[1:] -= self.dx * J_s
        diag = np.zeros_like(phi)
        diag[:-1] += self.dx * J_rr
        diag[1:] += self.dx * J_ss
        off = self.dx * J_rs
        # Hessian of the objective is minus the Hessian of the integral
        return g, -diag, -off

    def project(self, u):
        out = u.copy()
        out[1:] = isotonic_regression(u[1:], weights=self.dx, increasing=False).x
        return out

    def pg_direction(self, g):
        """Ascent direction in ``u`` under the metric ``diag(1, dx)``."""
        tail = np.cumsum(g[::-1])[::-1]
        return np.concatenate([[tail[0]], tail[1:]])


def _faces(slopes, tol):
    """Start indices of runs of (numerically) equal slopes."""
    jump = np.abs(np.diff(slopes)) > tol * (1.0 + np.abs(slopes[:-1]))
    return np.concatenate([[0], np.flatnonzero(jump) + 1, [slopes.size]])


def _newton_direction(prob: _Problem, u, g, diag, off):
    """Newton step on the current face, expressed in ``u`` coordinates."""
    x = prob.x
    starts = _faces(u[1:], 1e-12)
    lo = x[starts[:-1]]
    hi = x[starts[1:]]
    # phi = phi_1 + sum_b beta_b * clip(x - lo_b, 0, hi_b - lo_b)
    B = np.empty((x.size, lo.size + 1))
    B[:, 0] = 1.0
    B[:, 1:] = np.clip(x[:, None] - lo[None, :], 0.0, (hi - lo)[None, :])
    HB = diag[:, None] * B
    HB[:-1] += off[:, None] * B[1:]
    HB[1:] += off[:, None] * B[:-1]
    G = B.T @ HB
    try:
        step = np.linalg.solve(-G, B.T @ g)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    du = np.empty_like(u)
    du[0] = step[0]
    du[1:] = np.repeat(step[1:], np.diff(starts))
    return du


def _line_search(prob: _Problem, u, f0, direction, slope, t0, max_halvings=60):
    """Armijo backtracking along the projection arc ``P(u + t d)``."""
    t = t0
    for _ in range(max_halvings):
        cand = prob.project(u + t * direction)
        phi = prob.phi(cand)
        if np.all(np.isfinite(phi)):
            f = prob.value(phi)
            gain = slope @ (cand - u)
            if np.isfinite(f) and f >= f0 + ARMIJO * gain and f >= f0:
                return cand, f, t
        t *= 0.5
    return None


def logconcave_mle(data, tol: float = 1e-7, max_iter: int = 10000) -> MleResult:
    """Log-concave MLE of a univariate sample.

    Parameters
    ----------
    data : array_like
        Observations; ties are handled through multiplicities.
    tol : float
        Stationarity tolerance on the projected gradient map.
    max_iter : int
        Maximum number of outer iterations. On exhaustion the best iterate
        is returned with ``converged=False``.

    Returns
    -------
    MleResult
        Support is ``[X_(1), X_(n)]`` and the knots are observations.
    """
    raw = np.asarray(data, dtype=float).ravel()
    if raw.size < 2:
        raise DataError("the MLE needs at least two observations")
    if not np.all(np.isfinite(raw)):
        raise DataError("data contain non-finite values")
    x, counts = np.unique(raw, return_counts=True)
    if x.size < 2:
        raise DataError("all observations are equal; the MLE does not exist")
    prob = _Problem(x, counts / raw.size)

    u = np.zeros(x.size)
    u[0] = -np.log(x[-1] - x[0])
    phi = prob.phi(u)
    f = prob.value(phi)
    trace = [f]
    t_pg = 1.0
    converged = False
    pg_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g, diag, off = prob.grad_hess(phi)
        d_pg = prob.pg_direction(g)
        pg_norm = float(np.max(np.abs(prob.project(u + d_pg) - u)))
        if pg_norm <= tol:
            converged = True
            break
        f_start = f
        du = _newton_direction(prob, u, g, diag, off)
        if du is not None:
            res = _line_search(prob, u, f, du, _metric_grad(prob, d_pg), 1.0, max_halvings=30)
            if res is not None:
                u, f, _ = res
                g, _, _ = prob.grad_hess(prob.phi(u))
                d_pg = prob.pg_direction(g)
        res = _line_search(prob, u, f, d_pg, _metric_grad(prob, d_pg), t_pg * 4.0)
        if res is not None:
            u, f, t_pg = res
        phi = prob.phi(u)
        trace.append(f)
        if not f > f_start:
            # no ascent possible at machine precision
            g, _, _ = prob.grad_hess(phi)
            pg_norm = float(np.max(np.abs(prob.project(u + prob.pg_direction(g)) - u)))
            converged = pg_norm <= tol
            break

    w = PiecewiseLinearFn(x, phi)
    w = PiecewiseLinearFn(x, phi - log_norm_const(w))
    return MleResult(w, np.asarray(trace), converged, it, pg_norm)


def _metric_grad(prob: _Problem, d_pg):
    """Gradient of the objective in ``u`` coordinates."""
    return d_pg * np.concatenate([[1.0], prob.dx])


def hellinger_to_truth(result: MleResult, truth: Evaluable, **kwargs) -> float:
    """Hellinger distance between the fitted density and ``truth``."""
    return hellinger(result, truth, **kwargs)
