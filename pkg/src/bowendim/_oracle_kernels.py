"""Compiled loops of the monolithic (un-normalized) reference iteration.

This path is deliberately unrelated to the main operator: Cartesian nodes
(x, y) with y on a sinh-stretched axis, tensor cubic Lagrange interpolation,
per-node tail quadrature, and the vertical-clamp tail model.
"""

import math

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _bracket(nodes, v):
    n = nodes.shape[0]
    if v <= nodes[0]:
        return 0
    if v >= nodes[n - 1]:
        return n - 2
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if nodes[mid] <= v:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def _lagrange4(nodes, v, out):
    """Cubic Lagrange weights on 4 consecutive nodes; returns the first index."""
    n = nodes.shape[0]
    i = _bracket(nodes, v) - 1
    if i < 0:
        i = 0
    if i > n - 4:
        i = n - 4
    for a in range(4):
        w = 1.0
        xa = nodes[i + a]
        for b in range(4):
            if b != a:
                xb = nodes[i + b]
                w *= (v - xb) / (xa - xb)
        out[a] = w
    return i


@njit(cache=True)
def cubic_u(xs, ys, U, x, y, wx, wy):
    if x < xs[0]:
        x = xs[0]
    if x > xs[xs.shape[0] - 1]:
        x = xs[xs.shape[0] - 1]
    ymax = ys[ys.shape[0] - 1]
    if y > ymax:
        y = ymax
    elif y < -ymax:
        y = -ymax
    i = _lagrange4(xs, x, wx)
    j = _lagrange4(ys, y, wy)
    acc = 0.0
    for a in range(4):
        row = 0.0
        for b in range(4):
            row += wy[b] * U[i + a, j + b]
        acc += wx[a] * row
    return acc


@njit(cache=True)
def _term(xs, ys, U, e, s, c, c2, Y, wx, wy):
    u = cubic_u(xs, ys, U, c, Y, wx, wy)
    return u * math.exp(-(s + 0.5 * e) * math.log(c2 + Y * Y))


@njit(cache=True)
def _tail_series(c2, y1, s):
    q = c2 / (y1 * y1)
    tot = 0.0
    coef = 1.0
    base = y1 ** (1.0 - 2.0 * s)
    for m in range(300):
        term = coef * base * q ** m / (2.0 * s + 2.0 * m - 1.0)
        tot += term
        if abs(term) < 1e-17 * abs(tot):
            break
        coef *= -(s + m) / (m + 1.0)
    return tot


@njit(cache=True)
def _side(xs, ys, U, e, s, c, c2, y_start, sign, gl_x, gl_w, panel_w, wx, wy):
    """Integral of the summand over sign*Y in [y_start, inf)."""
    ymax = ys[ys.shape[0] - 1]
    total = 0.0
    if ymax > y_start:
        v0 = math.log(y_start)
        v1 = math.log(ymax)
        npan = max(1, int(math.ceil((v1 - v0) / panel_w)))
        h = (v1 - v0) / npan
        for p in range(npan):
            a0 = v0 + p * h
            for q in range(gl_x.shape[0]):
                y = math.exp(a0 + 0.5 * h * (gl_x[q] + 1.0))
                total += 0.5 * h * gl_w[q] * y * _term(xs, ys, U, e, s, c, c2, sign * y, wx, wy)
        y_start = ymax
    u_edge = cubic_u(xs, ys, U, c, sign * ymax, wx, wy)
    return total + u_edge * _tail_series(c2, y_start, s + 0.5 * e)


@njit(parallel=True, cache=True)
def transfer(xs, ys, G, e_in, eta_re, eta_im, t, tau, k_explicit, gl_x, gl_w, panel_w):
    nx = xs.shape[0]
    ny = ys.shape[0]
    U = np.empty_like(G)
    for i in range(nx):
        for j in range(ny):
            r2 = xs[i] * xs[i] + ys[j] * ys[j]
            U[i, j] = G[i, j] * math.exp(0.5 * e_in * math.log1p(r2))
    s = 0.5 * tau * t
    log_eta = 0.5 * math.log(eta_re * eta_re + eta_im * eta_im)
    arg_eta = math.atan2(eta_im, eta_re)
    out = np.empty_like(G)
    hd = 0.25
    for i in prange(nx):
        wx = np.empty(4)
        wy = np.empty(4)
        for j in range(ny):
            x = xs[i]
            y = ys[j]
            r2 = x * x + y * y
            c = 0.5 * math.log(r2) - log_eta
            c2 = 1.0 + c * c
            phi = math.atan2(y, x) - arg_eta
            acc = 0.0
            for k in range(-k_explicit, k_explicit + 1):
                acc += _term(xs, ys, U, e_in, s, c, c2, phi + TWO_PI * k, wx, wy)
            yp = phi + TWO_PI * (k_explicit + 0.5)
            ym = phi - TWO_PI * (k_explicit + 0.5)
            tail = _side(xs, ys, U, e_in, s, c, c2, yp, 1.0, gl_x, gl_w, panel_w, wx, wy)
            tail += _side(xs, ys, U, e_in, s, c, c2, -ym, -1.0, gl_x, gl_w, panel_w, wx, wy)
            dp = (_term(xs, ys, U, e_in, s, c, c2, yp + hd, wx, wy)
                  - _term(xs, ys, U, e_in, s, c, c2, yp - hd, wx, wy)) / (2.0 * hd)
            dm = (_term(xs, ys, U, e_in, s, c, c2, ym + hd, wx, wy)
                  - _term(xs, ys, U, e_in, s, c, c2, ym - hd, wx, wy)) / (2.0 * hd)
            acc += tail / TWO_PI + TWO_PI * (dp - dm) / 24.0
            pre = math.exp(-0.5 * t * math.log(r2) + s * math.log1p(r2))
            out[i, j] = pre * acc
    return out
