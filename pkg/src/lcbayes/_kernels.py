"""Compiled inner loops of the posterior sampler.

Parameter vector layout (length ``2N + 3``)::

    [theta_1..theta_N, w_1..w_{N-1}, gamma1, gamma2, a, b]

``w`` holds stick variables V_i (stick-breaking) or additive log-ratios
log(p_i / p_N) (Dirichlet-multinomial). Block ids: 0 knots, 1 weights,
2 gamma1, 3 gamma2, 4 support.
"""

import math

import numpy as np
from numba import njit

STICK = 0
DIRICHLET = 1
SUPPORT_FIXED = 0
SUPPORT_HIER = 2

# hyperparameter vector indices
HP_MASS, HP_ALPHA, HP_S1, HP_S2, HP_ALOC, HP_ASCALE, HP_WSCALE = range(7)


@njit(cache=True)
def log_seg(d):
    """log((e^d - 1) / d) with the small-|d| series branch."""
    if abs(d) < 1e-8:
        return math.log1p(0.5 * d)
    if d > 0:
        return d + math.log(-math.expm1(-d)) - math.log(d)
    return math.log(-math.expm1(d)) - math.log(-d)


@njit(cache=True)
def weights_from_params(x, N, model, p):
    if model == STICK:
        rem = 1.0
        for i in range(N - 1):
            v = x[N + i]
            p[i] = v * rem
            rem *= 1.0 - v
        p[N - 1] = rem
    else:
        mx = 0.0
        for i in range(N - 1):
            if x[N + i] > mx:
                mx = x[N + i]
        s = math.exp(-mx)
        for i in range(N - 1):
            p[i] = math.exp(x[N + i] - mx)
            s += p[i]
        for i in range(N - 1):
            p[i] /= s
        p[N - 1] = math.exp(-mx) / s


@njit(cache=True)
def log_norm(theta, p, g1, g2, width):
    """log int_0^width exp(W(a + t)) dt for the mixture log-density."""
    N = theta.size
    order = np.argsort(theta)
    tail = 0.0
    for i in range(N):
        tail += p[i] / theta[i]
    cum = 0.0
    t_prev = 0.0
    w_prev = 0.0
    mx = -np.inf
    acc = 0.0
    for k in range(N + 1):
        if k < N:
            i = order[k]
            t = min(theta[i], width)
            cum += p[i]
            tail -= p[i] / theta[i]
            wv = g1 * (cum + t * tail) - g2 * t
        else:
            t = width
            wv = g1 * cum - g2 * width
        dt = t - t_prev
        if dt > 0:
            seg = math.log(dt) + w_prev + log_seg(wv - w_prev)
            if seg > mx:
                acc = acc * math.exp(mx - seg) + 1.0
                mx = seg
            else:
                acc += math.exp(seg - mx)
        t_prev = t
        w_prev = wv
    return mx + math.log(acc)


@njit(cache=True)
def sum_w(theta, p, g1, g2, a, xs, cums):
    """sum_j W(x_j) using prefix sums of the sorted sample.

    ``cums[k] = sum_{j<k} (xs[j] - xs[0])``.
    """
    n = xs.size
    x0 = xs[0]
    total = cums[n] + n * (x0 - a)
    acc = 0.0
    for i in range(theta.size):
        t = theta[i]
        k = np.searchsorted(xs, a + t)
        below = cums[k] + k * (x0 - a)
        acc += p[i] * (below + t * (n - k)) / t
    return g1 * acc - g2 * total


@njit(cache=True)
def log_cauchy(x, loc, scale):
    z = (x - loc) / scale
    return -math.log(math.pi * scale) - math.log1p(z * z)


@njit(cache=True)
def log_post(x, N, model, support_mode, hp, xs, cums, p, out):
    """Fill ``out = (log_likelihood, log_prior)`` for parameter vector ``x``."""
    g1 = x[2 * N - 1]
    g2 = x[2 * N]
    a = x[2 * N + 1]
    b = x[2 * N + 2]
    width = b - a
    theta = x[:N]
    out[0] = -np.inf
    out[1] = -np.inf
    if not (width > 0) or g1 < 0:
        return
    for i in range(N):
        if not (theta[i] > 0) or theta[i] > width * (1 + 1e-12):
            return
    weights_from_params(x, N, model, p)
    lp = -N * math.log(width)
    if model == STICK:
        H = hp[HP_MASS]
        for i in range(N - 1):
            v = x[N + i]
            if not (v >= 0.0 and v <= 1.0):
                return
            lp += math.log(H)
            if H != 1.0:
                if v >= 1.0:
                    return
                lp += (H - 1.0) * math.log1p(-v)
    else:
        ai = hp[HP_ALPHA] / N
        lp += math.lgamma(hp[HP_ALPHA]) - N * math.lgamma(ai)
        for i in range(N):
            if p[i] <= 0.0:
                return
            lp += (ai - 1.0) * math.log(p[i])
    lp += math.log(2.0) + log_cauchy(g1, 0.0, hp[HP_S1])
    lp += log_cauchy(g2, 0.0, hp[HP_S2])
    if support_mode == SUPPORT_HIER:
        lp += log_cauchy(a, hp[HP_ALOC], hp[HP_ASCALE])
        lp += math.log(2.0) + log_cauchy(width, 0.0, hp[HP_WSCALE])
    out[1] = lp
    n = xs.size
    if xs[0] < a or xs[n - 1] > b:
        return
    out[0] = sum_w(theta, p, g1, g2, a, xs, cums) - n * log_norm(theta, p, g1, g2, width)


@njit(cache=True)
def _reflect(v, width):
    y = v % (2.0 * width)
    if y > width:
        y = 2.0 * width - y
    return y


@njit(cache=True)
def sweep(x, cur, scales, max_scales, mask, N, model, support_mode, hp, xs, cums,
          normals, uniforms, acc, prop, adapt_rate, target, p, work):
    """One Metropolis-within-Gibbs sweep, updating ``x`` and ``cur`` in place.

    Every coordinate ``c`` uses ``normals[c]`` and ``uniforms[c]``. When
    ``adapt_rate > 0`` each coordinate's scale moves by
    ``exp(adapt_rate * (accepted - target))``, capped at ``max_scales[c]``.
    """
    n_par = 2 * N + 3
    ig1 = 2 * N - 1
    ia = 2 * N + 1
    ib = 2 * N + 2
    for c in range(n_par):
        if c < N:
            blk = 0
        elif c < ig1:
            blk = 1
        elif c == ig1:
            blk = 2
        elif c == ig1 + 1:
            blk = 3
        else:
            blk = 4
        if mask[blk] == 0:
            continue
        if blk == 4 and support_mode != SUPPORT_HIER:
            continue
        old = x[c]
        s = scales[c]
        z = normals[c]
        jac = 0.0
        valid = True
        a = x[ia]
        b = x[ib]
        width = b - a
        if blk == 0:
            new = _reflect(old + s * z, width)
            if not (new > 0):
                valid = False
            x[c] = new
        elif blk == 1:
            if model == STICK:
                if s * z == 0.0:
                    new = old
                else:
                    eta = math.log(old) - math.log1p(-old) + s * z
                    new = 1.0 / (1.0 + math.exp(-eta))
                if new <= 0.0 or new >= 1.0:
                    valid = False
                else:
                    jac = math.log(new) + math.log1p(-new) - math.log(old) - math.log1p(-old)
                x[c] = new
            else:
                weights_from_params(x, N, model, p)
                for i in range(N):
                    jac -= math.log(p[i])
                new = old + s * z
                x[c] = new
                weights_from_params(x, N, model, p)
                for i in range(N):
                    jac += math.log(p[i])
        elif blk == 2:
            new = old * math.exp(s * z)
            jac = s * z
            x[c] = new
        elif blk == 3:
            new = old + s * z
            x[c] = new
        else:
            for i in range(N):
                work[i] = x[i]
            if c == ia:
                new = old + s * z
                if new > xs[0]:
                    new = 2.0 * xs[0] - new
                ratio = (b - new) / (b - old)
            else:
                new = old + s * z
                if new < xs[xs.size - 1]:
                    new = 2.0 * xs[xs.size - 1] - new
                ratio = (new - a) / (old - a)
            if not (ratio > 0):
                valid = False
            else:
                x[c] = new
                new_width = x[ib] - x[ia]
                for i in range(N):
                    x[i] = min(work[i] * ratio, new_width)
                jac = N * math.log(ratio)
        accepted = False
        if valid:
            ll_old = cur[0]
            lp_old = cur[1]
            log_post(x, N, model, support_mode, hp, xs, cums, p, work[N:N + 2])
            ll_new = work[N]
            lp_new = work[N + 1]
            logr = (ll_new + lp_new) - (ll_old + lp_old) + jac
            if math.log(uniforms[c]) < logr:
                accepted = True
                cur[0] = ll_new
                cur[1] = lp_new
        if not accepted:
            x[c] = old
            if blk == 4 and valid:
                for i in range(N):
                    x[i] = work[i]
        prop[blk] += 1
        if accepted:
            acc[blk] += 1
        if adapt_rate > 0.0:
            scales[c] = min(scales[c] * math.exp(adapt_rate * ((1.0 if accepted else 0.0) - target)), max_scales[c])


@njit(cache=True)
def density_at(x, N, model, points, log_z, p, out):
    """exp(W(t) - log_z) at ``points``; zero outside [a, b]."""
    g1 = x[2 * N - 1]
    g2 = x[2 * N]
    a = x[2 * N + 1]
    b = x[2 * N + 2]
    weights_from_params(x, N, model, p)
    for j in range(points.size):
        t = points[j]
        if t < a or t > b:
            out[j] = 0.0
            continue
        u = t - a
        w = 0.0
        for i in range(N):
            th = x[i]
            w += p[i] * (th if th < u else u) / th
        out[j] = math.exp(g1 * w - g2 * u - log_z)


@njit(cache=True)
def log_norm_params(x, N, model, p):
    weights_from_params(x, N, model, p)
    width = x[2 * N + 2] - x[2 * N + 1]
    return log_norm(x[:N], p, x[2 * N - 1], x[2 * N], width)
