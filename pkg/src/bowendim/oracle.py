"""Reference values for log L^n 1(w0).

Two independent routes:

* ``tree_pressure`` expands the n-level preimage tree depth first with sound
  bounds on everything it does not visit.  The k-series has power-law tails,
  so it meets tight tolerances only for very shallow trees.
* ``monolithic_log_mass`` iterates the un-normalized operator on a Cartesian
  grid with cubic interpolation, sharing no code with the main operator, and
  keeps the running log-scale so deep compositions do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _oracle_kernels
from .config import DEFAULT, Config
from .expfamily import DomainError, Potential, power_tail_integral

TWO_PI = 2.0 * math.pi


class TreeBudgetError(ArithmeticError):
    """The tree could not be resolved to the requested tolerance."""

    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class TreePressure:
    w0: complex
    n: int
    log_value: float
    pruned_mass_bound: float
    nodes_expanded: int

    @property
    def relative_bound(self) -> float:
        return self.pruned_mass_bound / math.exp(self.log_value)


class _Neumaier:
    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


_LX_STEP = 1e-3
_LX = np.arange(0.0, 120.0, _LX_STEP)


def _level_profile(eta: complex, pot: Potential) -> np.ndarray:
    """Pointwise bound of (L_eta 1)(w) on |w| = exp(x), x on _LX.

    With f(Y) = (1+c^2+Y^2)^(-s) unimodal, a lattice sum of spacing 2 pi is at
    most max f + (1/2 pi) * integral of f.
    """
    from scipy.special import beta

    s = pot.s
    c = _LX - math.log(abs(eta))
    c2 = 1.0 + c * c
    series = c2 ** (-s) + c2 ** (0.5 - s) * beta(s - 0.5, 0.5) / TWO_PI
    return np.exp(-pot.t * _LX + s * np.log1p(np.exp(2 * _LX))) * series * 1.001


def level_sup(eta: complex, pot: Potential) -> float:
    """Upper bound for sup over |w| >= 1 of (L_eta 1)(w), with a small safety factor."""
    return float(_level_profile(eta, pot).max())


def _side_bounds(c2: float, s: float, y1: float) -> tuple[float, float]:
    """Lower and upper bounds for sum_{m>=0} f(y1 + 2 pi m), f = (c2+Y^2)^-s, y1 >= 0."""
    f1 = (c2 + y1 * y1) ** (-s)
    integral = power_tail_integral(c2, y1, s) / TWO_PI
    y_convex = math.sqrt(c2 / (2 * s + 1))
    if y1 - math.pi >= y_convex:
        # f convex: trapezoid overestimates, midpoint underestimates the integral
        lower = integral + 0.5 * f1
        upper = power_tail_integral(c2, y1 - math.pi, s) / TWO_PI
        return lower, max(upper, lower)
    return integral, f1 + integral


class _Tree:
    def __init__(self, etas, pot, rel_tol, budget, k_max):
        self.etas = etas
        self.pot = pot
        self.s = pot.s
        self.n = len(etas)
        self.rel_tol = rel_tol
        self.budget = budget
        self.k_max = k_max
        self.kept = _Neumaier()
        self.pruned = _Neumaier()
        self.nodes = 0
        profiles = [_level_profile(e, pot) for e in etas]
        # rest[d]: bound on L^(n-d) 1 below a node at depth d
        self.rest = [1.0] * (self.n + 1)
        for d in range(self.n - 1, -1, -1):
            self.rest[d] = self.rest[d + 1] * float(profiles[self.n - 1 - d].max())
        # sfx[j][i]: max of the level-j profile over x >= _LX[i]
        self.sfx = [np.maximum.accumulate(p[::-1])[::-1] for p in profiles]

    def below(self, d: int, modulus: float) -> float:
        """Bound on the subtree mass under a child at depth d + 1 with |z| >= modulus."""
        if d + 1 >= self.n:
            return 1.0
        i = min(max(int(math.log(modulus) / _LX_STEP), 0), len(_LX) - 1)
        return float(self.sfx[self.n - 2 - d][i]) * self.rest[d + 2]

    def threshold(self) -> float:
        if self.nodes >= self.budget:
            return math.inf
        return self.rel_tol * self.kept.value / self.budget

    def expand(self, z: complex, W: float, d: int) -> None:
        eta = self.etas[self.n - 1 - d]
        base = complex(np.log(z / eta))
        c, phi = base.real, base.imag
        c2 = 1.0 + c * c
        az2 = abs(z) ** 2
        pre = math.exp(-0.5 * self.pot.t * math.log(az2) + self.s * math.log1p(az2))
        leaf = d == self.n - 1
        K = self.k_max
        # two monotone sequences: Y = phi + 2 pi k >= 0 and Y < 0
        kp = 0 if phi >= 0 else 1
        km = kp - 1
        while True:
            yp = phi + TWO_PI * kp
            ym = phi + TWO_PI * km
            p_ok = K is None or kp <= K
            m_ok = K is None or km >= -K
            if not (p_ok or m_ok):
                return
            if p_ok and (not m_ok or yp <= -ym):
                k, y = kp, yp
            else:
                k, y = km, ym
            wk = W * pre * (c2 + y * y) ** (-self.s)
            if leaf and K is None:
                # the bracketed tail is as good as enumeration once it is this narrow
                test = W * pre * self._leaf_width(c2, phi, kp, km)
            else:
                test = wk * self.below(d, math.sqrt(c2 - 1.0 + y * y))
            if test < self.threshold() and self.kept.value > 0:
                self._prune_rest(c2, pre * W, d, leaf, kp, km, phi, p_ok, m_ok)
                return
            self.nodes += 1
            if leaf:
                self.kept.add(wk)
            else:
                self.expand(complex(c, y), wk, d + 1)
            if k == kp:
                kp += 1
            else:
                km -= 1

    def _leaf_width(self, c2, phi, kp, km) -> float:
        w = 0.0
        for y1 in (phi + TWO_PI * kp, -(phi + TWO_PI * km)):
            lo, hi = _side_bounds(c2, self.s, y1)
            w += hi - lo
        return w

    def _prune_rest(self, c2, scale, d, leaf, kp, km, phi, p_ok, m_ok):
        s = self.s
        for ok, y1, k1, sign in ((p_ok, phi + TWO_PI * kp, kp, 1), (m_ok, -(phi + TWO_PI * km), km, -1)):
            if not ok:
                continue
            # every remaining sibling on this side has |z| >= |c + i y1|
            below = self.below(d, math.sqrt(c2 - 1.0 + y1 * y1))
            if self.k_max is None:
                lo, hi = _side_bounds(c2, s, y1)
                if leaf:
                    self.kept.add(scale * lo)
                    self.pruned.add(scale * (hi - lo))
                else:
                    self.pruned.add(scale * hi * below)
            else:
                last = TWO_PI * (self.k_max - sign * k1)
                f1 = (c2 + y1 * y1) ** (-s)
                span = (power_tail_integral(c2, y1, s) - power_tail_integral(c2, y1 + last, s)) / TWO_PI
                self.pruned.add(scale * (f1 + span) * below)


def tree_pressure(fiber_prefix: Sequence, pot: Potential, w0: complex, n: int,
                  rel_tol: float, node_budget: int = DEFAULT.node_budget,
                  k_max: int | None = None) -> TreePressure:
    """Depth-first expansion of all length-n inverse-branch chains from w0.

    ``fiber_prefix[j]`` is the parameter of the j-th operator in the
    composition L_{n-1} o ... o L_0, so the expansion from w0 uses the last
    one first.  Children are visited in decreasing weight order; once a
    child's weight times the bound on its subtree drops below
    rel_tol * (running total) / node_budget, all remaining siblings are
    bounded at once by an integral comparison.  At the last level that tail is
    bracketed from both sides and its lower bound is kept.  With ``k_max`` the
    series is restricted to |k| <= k_max (finite universe, no tail credit).
    """
    if n < 1:
        raise ValueError("depth must be at least 1")
    if not pot.t * pot.tau > 1:
        raise DomainError("tau*t must exceed 1")
    if len(fiber_prefix) < n:
        raise ValueError("fiber prefix shorter than depth")
    etas = [complex(getattr(p, "eta", p)) for p in fiber_prefix[:n]]
    w0 = complex(w0)
    if abs(w0) <= math.e * max(abs(e) for e in etas):
        raise DomainError("w0 too close to 0 for preimages to lie in U")
    tree = _Tree(etas, pot, rel_tol, node_budget, k_max)
    tree.expand(w0, 1.0, 0)
    kept = tree.kept.value
    result = TreePressure(w0, n, math.log(kept), tree.pruned.value, tree.nodes)
    if not tree.pruned.value < rel_tol * kept:
        why = "node budget exhausted" if tree.nodes >= node_budget else "tolerance not met"
        raise TreeBudgetError(f"{why}: pruned mass {result.relative_bound:.3g} of total "
                              f"exceeds {rel_tol}", result)
    return result


# ------------------------------------------------------------ deep route

@dataclass(frozen=True)
class CartesianGrid:
    xs: np.ndarray
    ys: np.ndarray
    i0: int
    j0: int


def cartesian_grid(nx: int, ny: int, radius: float, w0: float = 2.0,
                   min_eta: float = 1.0 / (6 * math.e)) -> CartesianGrid:
    x_hi = math.log(math.hypot(radius, radius)) - math.log(min_eta) + 0.5
    s = np.linspace(0.0, 1.0, nx)
    xs = 1.0 + (x_hi - 1.0) * np.sinh(3.0 * s) / math.sinh(3.0)
    i0 = int(np.argmin(np.abs(xs - w0)))
    xs[i0] = w0
    if ny % 2 == 0:
        raise ValueError("ny must be odd")
    sig = np.linspace(-math.asinh(radius), math.asinh(radius), ny)
    ys = np.sinh(sig)
    ys[ny // 2] = 0.0
    ys[0], ys[-1] = -radius, radius
    return CartesianGrid(xs, ys, i0, ny // 2)


_GLX, _GLW = np.polynomial.legendre.leggauss(6)


def monolithic_log_mass(etas: Sequence[complex], pot: Potential, n: int, cfg: Config = DEFAULT,
                        w0: float | None = None, grid: CartesianGrid | None = None,
                        k_explicit: int | None = None) -> np.ndarray:
    """log (L_{m-1} o ... o L_0 1)(w0) for m = 1..n, un-normalized.

    ``etas[0]`` is applied first (innermost).  The iterate is rescaled by its
    maximum after every step and the scale is accumulated in log form.
    """
    w0 = cfg.xi0 if w0 is None else w0
    if grid is None:
        grid = cartesian_grid(cfg.oracle_nx, cfg.oracle_ny, cfg.y_max, w0)
    if grid.xs[grid.i0] != w0 or grid.ys[grid.j0] != 0.0:
        raise ValueError("w0 must be a node of the reference grid")
    K = cfg.oracle_k_explicit if k_explicit is None else k_explicit
    G = np.ones((len(grid.xs), len(grid.ys)))
    e = 0.0
    log_scale = 0.0
    out = np.empty(n)
    for m in range(n):
        eta = complex(getattr(etas[m], "eta", etas[m]))
        H = _oracle_kernels.transfer(grid.xs, grid.ys, G, e, eta.real, eta.imag, pot.t, pot.tau,
                                     K, _GLX, _GLW, 1.0)
        np.maximum(H, 0.0, out=H)
        top = H.max()
        if not (top > 0 and math.isfinite(top)):
            raise ArithmeticError("reference iterate lost positivity")
        G = H / top
        log_scale += math.log(top)
        e = pot.iterate_decay
        out[m] = log_scale + math.log(G[grid.i0, grid.j0])
    return out


def oracle_pressure(eta: complex, pot: Potential, n: int, cfg: Config = DEFAULT) -> float:
    """(1/n) log L^n 1(xi0) for the autonomous map eta*exp(z)."""
    return float(monolithic_log_mass([eta] * n, pot, n, cfg)[-1] / n)


def oracle_bowen(law, cfg: Config = DEFAULT, depth: int | None = None) -> float:
    """Bisection in t on (1/n) log L^n 1(xi0) for the autonomous law (r = 0)."""
    from .pressure import tau_schedule

    if law.r != 0:
        raise ValueError("oracle_bowen needs r = 0")
    n = depth or cfg.oracle_depth

    def P(t):
        tau = tau_schedule(t, cfg)
        if t * tau < 1.02:
            raise DomainError(f"t={t} below 1.02/tau")
        return oracle_pressure(complex(law.a), Potential(t, tau), n, cfg)

    lo, hi = cfg.t_lo, cfg.t_hi
    plo, phi_ = P(lo), P(hi)
    if not plo > 0 > phi_:
        raise ArithmeticError(f"no bracket for the reference pressure on [{lo}, {hi}]")
    while True:
        mid = 0.5 * (lo + hi)
        pm = P(mid)
        if abs(pm) < cfg.oracle_root_tol or hi - lo < 1e-9:
            return mid
        if pm > 0:
            lo = mid
        else:
            hi = mid
