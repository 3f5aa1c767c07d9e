"""Compiled inner loops for the log-polar transfer operator.

Grid functions are stored as values g on nodes (X_i, th_j) with X = log|z| and
th = arg z.  Interpolation acts on u = g * (1+|z|^2)^(e/2), where e is the
tail exponent of the function; beyond the outer radius u is held constant in
X, which is the power-law tail model.
"""

import math

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def locate(nodes, v):
    n = nodes.shape[0]
    if v <= nodes[0]:
        return 0, 0.0
    if v >= nodes[n - 1]:
        return n - 2, 1.0
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if nodes[mid] <= v:
            lo = mid
        else:
            hi = mid
    return lo, (v - nodes[lo]) / (nodes[lo + 1] - nodes[lo])


@njit(cache=True)
def interp_u(Xn, th0, dth, U, X, th):
    i, fx = locate(Xn, X)
    nth = U.shape[1]
    s = (th - th0) / dth
    if s <= 0.0:
        j = 0
        fy = 0.0
    elif s >= nth - 1:
        j = nth - 2
        fy = 1.0
    else:
        j = int(s)
        fy = s - j
    return ((1.0 - fx) * ((1.0 - fy) * U[i, j] + fy * U[i, j + 1])
            + fx * ((1.0 - fy) * U[i + 1, j] + fy * U[i + 1, j + 1]))


@njit(cache=True)
def g_at(Xn, th0, dth, U, e, x, y):
    r2 = x * x + y * y
    u = interp_u(Xn, th0, dth, U, 0.5 * math.log(r2), math.atan2(y, x))
    if e == 0.0:
        return u
    return u * math.exp(-0.5 * e * math.log1p(r2))


@njit(cache=True)
def eval_many(Xn, th0, dth, U, e, xs, ys):
    out = np.empty(xs.shape[0])
    for m in range(xs.shape[0]):
        out[m] = g_at(Xn, th0, dth, U, e, xs[m], ys[m])
    return out


@njit(cache=True)
def power_tail(c2, y1, s):
    """Integral of (c2 + y^2)^-s over [y1, inf) for y1^2 > c2, by binomial series."""
    q = c2 / (y1 * y1)
    tot = 0.0
    coef = 1.0
    base = y1 ** (1.0 - 2.0 * s)
    for m in range(200):
        term = coef * base * q ** m / (2.0 * s + 2.0 * m - 1.0)
        tot += term
        if abs(term) < 1e-17 * abs(tot):
            break
        coef *= -(s + m) / (m + 1.0)
    return tot


@njit(cache=True)
def _F(Xn, th0, dth, U, e, s, c, c2, Y):
    # summand of the k-series as a function of the imaginary part Y;
    # c > 0 here, and c2 + Y^2 = 1 + |z|^2
    r2 = c * c + Y * Y
    u = interp_u(Xn, th0, dth, U, 0.5 * math.log(r2), math.atan(Y / c))
    return u * math.exp(-(s + 0.5 * e) * math.log(c2 + Y * Y))


@njit(cache=True)
def _far_integral(Xn, th0, dth, U, e, s, c, c2, y_ref, sign, R, gl_x, gl_w, panel_w):
    """Integral of F over sign*Y in [y_ref, inf) for one output row."""
    yr2 = R * R - c * c
    total = 0.0
    y_start = y_ref
    if yr2 > y_ref * y_ref:
        y_out = math.sqrt(yr2)
        v0 = math.log(y_ref)
        v1 = math.log(y_out)
        npan = max(1, int(math.ceil((v1 - v0) / panel_w)))
        h = (v1 - v0) / npan
        for p in range(npan):
            a0 = v0 + p * h
            for q in range(gl_x.shape[0]):
                y = math.exp(a0 + 0.5 * h * (gl_x[q] + 1.0))
                total += 0.5 * h * gl_w[q] * y * _F(Xn, th0, dth, U, e, s, c, c2, sign * y)
        y_start = y_out
    # beyond the outer circle u is frozen at its boundary value
    th_edge = math.atan2(sign * y_start, c)
    u_edge = interp_u(Xn, th0, dth, U, Xn[Xn.shape[0] - 1], th_edge)
    total += u_edge * power_tail(c2, y_start, s + 0.5 * e)
    return total


@njit(cache=True)
def _gl(Xn, th0, dth, U, e, s, c, c2, ya, yb, gl_x, gl_w):
    h = 0.5 * (yb - ya)
    m = 0.5 * (yb + ya)
    acc = 0.0
    for q in range(gl_x.shape[0]):
        acc += gl_w[q] * _F(Xn, th0, dth, U, e, s, c, c2, m + h * gl_x[q])
    return h * acc


@njit(parallel=True, cache=True)
def apply_transfer(Xn, th0, dth, G, e_in, eta_re, eta_im, t, tau, k_explicit, k_finite,
                   R, gl_x, gl_w, panel_w):
    """One application of the transfer operator on the whole grid.

    For |k| <= k_explicit the series is summed term by term.  If k_finite >= 0
    the sum stops at |k| <= k_finite (which must not exceed k_explicit).
    Otherwise the remaining terms are replaced by the midpoint-rule integral
    with a first Euler-Maclaurin correction; the far part of that integral is
    shared by all nodes of a row.
    """
    nX = Xn.shape[0]
    nth = G.shape[1]
    U = np.empty_like(G)
    for i in range(nX):
        wgt = math.exp(0.5 * e_in * math.log1p(math.exp(2.0 * Xn[i]))) if e_in != 0.0 else 1.0
        for j in range(nth):
            U[i, j] = G[i, j] * wgt
    s = 0.5 * tau * t
    log_eta = 0.5 * math.log(eta_re * eta_re + eta_im * eta_im)
    arg_eta = math.atan2(eta_im, eta_re)
    out = np.empty_like(G)
    K = k_explicit if k_finite < 0 else k_finite
    y_ref = TWO_PI * (k_explicit + 0.5) + 0.5 * math.pi + abs(arg_eta) + 0.1
    hd = 0.25
    for i in prange(nX):
        X = Xn[i]
        c = X - log_eta
        c2 = 1.0 + c * c
        pre = math.exp(-t * X + s * math.log1p(math.exp(2.0 * X)))
        far_p = 0.0
        far_m = 0.0
        if k_finite < 0:
            far_p = _far_integral(Xn, th0, dth, U, e_in, s, c, c2, y_ref, 1.0, R, gl_x, gl_w, panel_w)
            far_m = _far_integral(Xn, th0, dth, U, e_in, s, c, c2, y_ref, -1.0, R, gl_x, gl_w, panel_w)
        for j in range(nth):
            phi = th0 + j * dth - arg_eta
            acc = 0.0
            for k in range(-K, K + 1):
                acc += _F(Xn, th0, dth, U, e_in, s, c, c2, phi + TWO_PI * k)
            if k_finite < 0:
                yp = phi + TWO_PI * (k_explicit + 0.5)
                ym = phi - TWO_PI * (k_explicit + 0.5)
                ip = _gl(Xn, th0, dth, U, e_in, s, c, c2, yp, y_ref, gl_x, gl_w) + far_p
                im = _gl(Xn, th0, dth, U, e_in, s, c, c2, -y_ref, ym, gl_x, gl_w) + far_m
                dp = (_F(Xn, th0, dth, U, e_in, s, c, c2, yp + hd)
                      - _F(Xn, th0, dth, U, e_in, s, c, c2, yp - hd)) / (2.0 * hd)
                dm = (_F(Xn, th0, dth, U, e_in, s, c, c2, ym + hd)
                      - _F(Xn, th0, dth, U, e_in, s, c, c2, ym - hd)) / (2.0 * hd)
                acc += (ip + im) / TWO_PI + TWO_PI * (dp - dm) / 24.0
            out[i, j] = pre * acc
    return out
