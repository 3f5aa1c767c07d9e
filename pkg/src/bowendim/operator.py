"""Grid functions on the truncated half-plane and the transfer operator acting on them.

Functions live on a tensor grid in (log|z|, arg z) covering U up to the radius
y_max.  The radial nodes are stretched towards |z| = 1 and include log|xi0|;
arg z = 0 is always a node, so the base point xi0 is an interior node.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .expfamily import DomainError, ExpParameter, HalfPlaneDomain, Potential, truncation_order

GL_ORDER = 4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class PositivityError(ArithmeticError):
    """l(L g) <= 0 during normalized iteration."""


@dataclass(frozen=True)
class LogPolarGrid:
    dom: HalfPlaneDomain
    X: np.ndarray
    n_angular: int
    k_explicit: int = 4
    panel_width: float = 2.0

    @property
    def th0(self) -> float:
        return -0.5 * math.pi

    @property
    def dth(self) -> float:
        return math.pi / (self.n_angular - 1)

    @property
    def theta(self) -> np.ndarray:
        return self.th0 + self.dth * np.arange(self.n_angular)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.X), self.n_angular)

    def nodes(self) -> np.ndarray:
        return np.exp(self.X[:, None] + 1j * self.theta[None, :])

    def node_of(self, z: complex) -> tuple[int, int] | None:
        z = complex(z)
        i = np.flatnonzero(self.X == 0.5 * math.log(abs(z) ** 2))
        s = (math.atan2(z.imag, z.real) - self.th0) / self.dth
        j = int(round(s))
        if len(i) and abs(s - j) < 1e-12:
            return int(i[0]), j
        return None


def make_grid(dom: HalfPlaneDomain, n_radial: int = 65, n_angular: int = 33,
              stretch: float = 4.0, xi0: float = 2.0, k_explicit: int = 4,
              panel_width: float = 2.0) -> LogPolarGrid:
    if n_angular % 2 == 0:
        raise ValueError("n_angular must be odd")
    xmax = math.log(dom.radius)
    s = np.linspace(0.0, 1.0, n_radial)
    X = xmax * np.sinh(stretch * s) / math.sinh(stretch)
    X[0] = 0.0
    X[-1] = xmax
    anchor = 0.5 * math.log(xi0 * xi0)
    i = int(np.argmin(np.abs(X - anchor)))
    if i in (0, n_radial - 1):
        raise ValueError("grid too coarse to hold the base point as an interior node")
    X[i] = anchor
    if not np.all(np.diff(X) > 0):
        raise ValueError("radial nodes not increasing after anchoring the base point")
    return LogPolarGrid(dom, X, n_angular, k_explicit, panel_width)


def grid_from_config(cfg) -> LogPolarGrid:
    dom = HalfPlaneDomain(1.0, cfg.x_max, cfg.y_max, cfg.delta, cfg.delta0)
    return make_grid(dom, cfg.n_radial, cfg.n_angular, cfg.grid_stretch, cfg.xi0,
                     cfg.k_explicit, cfg.panel_width)


@dataclass(frozen=True)
class GridFunction:
    grid: LogPolarGrid
    values: np.ndarray
    tail_exponent: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("grid values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def dom(self) -> HalfPlaneDomain:
        return self.grid.dom

    @property
    def nx(self) -> int:
        return self.grid.shape[0]

    @property
    def ny(self) -> int:
        return self.grid.shape[1]

    @classmethod
    def constant(cls, grid: LogPolarGrid, c: float = 1.0, tail_exponent: float = 0.0):
        return cls(grid, np.full(grid.shape, float(c)), tail_exponent)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * c, self.tail_exponent)

    def weighted(self) -> np.ndarray:
        e = self.tail_exponent
        return self.values * np.exp(0.5 * e * np.log1p(np.exp(2 * self.grid.X)))[:, None]

    # ---- persistence: header line, then radial nodes and row-major values
    def to_bytes(self) -> bytes:
        d = self.dom
        head = (f"bowendim-grid 1 x_min={d.x_min!r} x_max={d.x_max!r} y_max={d.y_max!r} "
                f"delta={d.delta!r} delta0={d.delta0!r} nx={self.nx} ny={self.ny} "
                f"tail_exponent={self.tail_exponent!r} k_explicit={self.grid.k_explicit} "
                f"panel_width={self.grid.panel_width!r}\n")
        buf = io.BytesIO()
        buf.write(head.encode())
        buf.write(self.grid.X.astype("<f8").tobytes())
        buf.write(self.values.astype("<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        nl = blob.index(b"\n")
        tokens = blob[:nl].decode().split()
        if tokens[:2] != ["bowendim-grid", "1"]:
            raise ValueError("not a grid dump")
        kv = dict(tok.split("=", 1) for tok in tokens[2:])
        dom = HalfPlaneDomain(float(kv["x_min"]), float(kv["x_max"]), float(kv["y_max"]),
                              float(kv["delta"]), float(kv["delta0"]))
        nx, ny = int(kv["nx"]), int(kv["ny"])
        body = np.frombuffer(blob[nl + 1:], dtype="<f8")
        X = body[:nx].copy()
        vals = body[nx:].reshape(nx, ny).copy()
        grid = LogPolarGrid(dom, X, ny, int(kv["k_explicit"]), float(kv["panel_width"]))
        return cls(grid, vals, float(kv["tail_exponent"]))

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("log_modulus,arg,value\n")
        th = self.grid.theta
        for i, X in enumerate(self.grid.X):
            for j in range(self.ny):
                out.write(f"{float(X)!r},{float(th[j])!r},{float(self.values[i, j])!r}\n")
        return out.getvalue()


def eval(g: GridFunction, z) -> float | np.ndarray:
    """Interpolate g at z (scalar or array); Re z below x_min is rejected."""
    za = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(za.real < g.dom.x_min):
        raise DomainError("evaluation point left of U")
    out = _kernels.eval_many(g.grid.X, g.grid.th0, g.grid.dth, g.weighted(), g.tail_exponent,
                             za.real.copy(), za.imag.copy())
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def _finite_order(p: ExpParameter, pot: Potential, grid: LogPolarGrid, eps_tail: float) -> int:
    """k-range to sum explicitly, or -1 when the integral tail treatment is needed."""
    corner = complex(np.exp(grid.X[-1] + 0.5j * math.pi))
    K = truncation_order(pot, corner, eps_tail, p.eta)
    return K if K <= grid.k_explicit else -1


def _apply_values(eta: complex, pot: Potential, grid: LogPolarGrid, values: np.ndarray,
                  tail_exponent: float, k_finite: int) -> np.ndarray:
    return _kernels.apply_transfer(grid.X, grid.th0, grid.dth, values, tail_exponent,
                                   eta.real, eta.imag, pot.t, pot.tau, grid.k_explicit,
                                   k_finite, grid.dom.radius, _GL_X, _GL_W, grid.panel_width)


def apply_transfer(p: ExpParameter, pot: Potential, g: GridFunction,
                   eps_tail: float = 1e-8) -> GridFunction:
    """(L g)(w) = sum over k of weight(z_k, w) g(z_k) at every node w.

    When the truncation order for eps_tail exceeds the explicit range, the
    k-series beyond it is evaluated as an integral with an Euler-Maclaurin
    correction and an analytic power-law remainder, i.e. effectively K = inf.
    """
    kf = _finite_order(p, pot, g.grid, eps_tail)
    vals = _apply_values(p.eta, pot, g.grid, g.values, g.tail_exponent, kf)
    if not np.all(np.isfinite(vals)):
        raise DomainError("non-finite operator output")
    np.maximum(vals, 0.0, out=vals)
    return GridFunction(g.grid, vals, pot.iterate_decay)


@dataclass(frozen=True)
class BasePointFunctional:
    xi0: complex = 2.0 + 0j

    def __call__(self, g: GridFunction) -> float:
        node = g.grid.node_of(self.xi0)
        if node is not None:
            return float(g.values[node])
        return eval(g, self.xi0)


@dataclass(frozen=True)
class NormalizedIterationState:
    g: GridFunction
    step_logs: tuple = ()
    step_index: int = 0

    @classmethod
    def start(cls, grid: LogPolarGrid, l: BasePointFunctional) -> "NormalizedIterationState":
        one = GridFunction.constant(grid, 1.0)
        return cls(one.scaled(1.0 / l(one)))


def normalized_step(state: NormalizedIterationState, p: ExpParameter, pot: Potential,
                    l: BasePointFunctional, eps_tail: float = 1e-8) -> NormalizedIterationState:
    h = apply_transfer(p, pot, state.g, eps_tail)
    lh = l(h)
    if not lh > 0:
        raise PositivityError(f"l(L g) = {lh} at step {state.step_index}")
    return NormalizedIterationState(h.scaled(1.0 / lh), state.step_logs + (math.log(lh),),
                                    state.step_index + 1)


def run_normalized(etas: Sequence[complex], pot: Potential, grid: LogPolarGrid,
                   l: BasePointFunctional, eps_tail: float = 1e-8,
                   g0: GridFunction | None = None, track_sup: bool = False):
    """Normalized iteration along etas without per-step state objects.

    Returns (step_logs, final GridFunction, sup-norms); sup-norms is None
    unless track_sup is set.
    """
    g = g0 if g0 is not None else GridFunction.constant(grid, 1.0)
    node = grid.node_of(l.xi0)
    if node is None:
        raise ValueError("base point must be a grid node")
    if not g.values[node] > 0:
        raise PositivityError("initial function vanishes at the base point")
    vals = g.values / g.values[node]
    e = g.tail_exponent
    logs = np.empty(len(etas))
    sups = np.empty(len(etas)) if track_sup else None
    cache: dict[complex, int] = {}
    for n, eta in enumerate(etas):
        eta = complex(eta)
        kf = cache.get(eta)
        if kf is None:
            kf = cache[eta] = _finite_order(_RawParam(eta), pot, grid, eps_tail)
        h = _apply_values(eta, pot, grid, vals, e, kf)
        lh = h[node]
        if not lh > 0 or not math.isfinite(lh):
            raise PositivityError(f"l(L g) = {lh} at step {n}")
        logs[n] = math.log(lh)
        vals = h / lh
        np.maximum(vals, 0.0, out=vals)
        e = pot.iterate_decay
        if track_sup:
            sups[n] = vals.max()
    return logs, GridFunction(grid, vals, e), sups


@dataclass(frozen=True)
class _RawParam:
    eta: complex


@dataclass(frozen=True)
class ConvergenceReport:
    distances: np.ndarray
    theta_hat: float
    r2: float
    n_fitted: int
    at_noise_floor: bool


NOISE_FLOOR = 1e-12


def density_convergence_diagnostic(etas: Sequence[complex], pot: Potential,
                                   l: BasePointFunctional, n_probe: int,
                                   grid: LogPolarGrid, eps_tail: float = 1e-8) -> ConvergenceReport:
    """Cauchy differences of pulled-back normalized iterates of 1.

    G_m is the normalized iterate of 1 started m steps before the target time
    2*n_probe and run up to it.  d_m = sup over nodes |G_m - G_2m| for
    m = 1..n_probe, and log d_m is fitted linearly in m on the points above
    the noise floor.
    """
    if n_probe < 8:
        raise ValueError("n_probe must be at least 8")
    target = 2 * n_probe
    if len(etas) < target:
        raise ValueError(f"need a fiber of length >= {target}")
    etas = list(etas[:target])
    G = {}
    for m in range(1, target + 1):
        _, g, _ = run_normalized(etas[target - m:], pot, grid, l, eps_tail)
        G[m] = g.values
    d = np.array([np.max(np.abs(G[m] - G[2 * m])) for m in range(1, n_probe + 1)])
    ms = np.arange(1, n_probe + 1)
    keep = d > NOISE_FLOOR
    if keep.sum() < 3:
        return ConvergenceReport(d, float("nan"), float("nan"), int(keep.sum()), True)
    x, y = ms[keep], np.log(d[keep])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceReport(d, float(math.exp(slope)), float(r2), int(keep.sum()), False)
