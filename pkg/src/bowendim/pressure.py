"""Expected pressure, its zero in t, sweeps over (a, r) and smoothness checks."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev

from .config import DEFAULT, Config
from .expfamily import Potential, expansion_floor
from .operator import BasePointFunctional, LogPolarGrid, grid_from_config, run_normalized
from .randomdriver import FiberSequence, ParameterLaw, sample_fiber

TAU_CAP = 0.999


class NoBracketError(ArithmeticError):
    """No sign change of the expected pressure on the admissible t-range."""

    def __init__(self, msg, samples):
        super().__init__(msg)
        self.samples = samples


def tau_schedule(t: float, cfg: Config = DEFAULT) -> float:
    return min(cfg.tau_for(t), TAU_CAP)


def law_from_config(a: float, r: float, cfg: Config = DEFAULT) -> ParameterLaw:
    return ParameterLaw(a, r, cfg.b, cfg.complex_law)


@dataclass(frozen=True)
class PressureEstimate:
    t: float
    tau: float
    value: float
    std_error: float
    N: int
    burn_in: int
    step_logs: np.ndarray = field(repr=False)


def batch_means_error(x: np.ndarray, batches: int) -> float:
    means = np.array([b.mean() for b in np.array_split(np.asarray(x), batches)])
    return float(means.std(ddof=1) / math.sqrt(batches))


def estimate_expected_pressure(fiber: FiberSequence, pot: Potential, l: BasePointFunctional,
                               cfg: Config = DEFAULT,
                               grid: LogPolarGrid | None = None) -> PressureEstimate:
    """Average of log l(L g) over the normalized iteration after burn-in."""
    B = cfg.burn_in
    if fiber.N < B + 200:
        raise ValueError(f"fiber length {fiber.N} < burn-in {B} + 200")
    grid = grid or grid_from_config(cfg)
    logs, _, _ = run_normalized(fiber.etas, pot, grid, l, cfg.eps_tail)
    tail = logs[B:]
    return PressureEstimate(pot.t, pot.tau, float(tail.mean()),
                            batch_means_error(tail, cfg.batches), fiber.N, B, logs)


@dataclass(frozen=True)
class DimensionResult:
    law: ParameterLaw
    h: float
    bracket: tuple
    residual: float
    evaluations: int
    seed: int
    slope: float
    std_error: float
    samples: tuple = field(default=(), repr=False)

    @property
    def h_noise(self) -> float:
        """Uncertainty of h induced by residual and Monte Carlo error."""
        return math.hypot(self.residual, self.std_error) / abs(self.slope)


class _PressureCurve:
    """t -> EP(t) on one fixed fiber, memoized."""

    def __init__(self, fiber: FiberSequence, cfg: Config, grid: LogPolarGrid):
        self.fiber, self.cfg, self.grid = fiber, cfg, grid
        self.l = BasePointFunctional(complex(cfg.xi0))
        self.cache: dict[float, PressureEstimate] = {}

    def __call__(self, t: float) -> PressureEstimate:
        if t not in self.cache:
            pot = Potential(t, tau_schedule(t, self.cfg))
            self.cache[t] = estimate_expected_pressure(self.fiber, pot, self.l, self.cfg, self.grid)
        return self.cache[t]

    def samples(self):
        return tuple((t, e.value) for t, e in sorted(self.cache.items()))


def find_bowen_zero(law: ParameterLaw, seed: int, cfg: Config = DEFAULT,
                    grid: LogPolarGrid | None = None) -> DimensionResult:
    """Zero of t -> EP(t) on a single common fiber: bracket, bisect, then secant."""
    fiber = sample_fiber(law, seed, cfg.steps, cfg.cert_iters)
    ep = _PressureCurve(fiber, cfg, grid or grid_from_config(cfg))

    lo, hi = cfg.t_lo, cfg.t_hi
    if ep(lo).value <= 0:
        lo = cfg.t_min
    while ep(hi).value >= 0 and hi < cfg.t_max:
        lo, hi = hi, min(cfg.t_max, 2 * hi - lo)
    if not (ep(lo).value > 0 > ep(hi).value):
        raise NoBracketError(f"no sign change of EP on [{cfg.t_min}, {cfg.t_max}]", ep.samples())

    while hi - lo > cfg.bracket_width:
        mid = 0.5 * (lo + hi)
        if ep(mid).value > 0:
            lo = mid
        else:
            hi = mid

    # false position with the Illinois modification; the bracket never degenerates
    flo, fhi = ep(lo).value, ep(hi).value
    side = 0
    h, fh = lo, flo
    for _ in range(cfg.max_polish):
        h = hi - fhi * (hi - lo) / (fhi - flo)
        fh = ep(h).value
        if abs(fh) < cfg.polish_tol:
            break
        if fh > 0:
            lo, flo = h, fh
            if side == 1:
                fhi *= 0.5
            side = 1
        else:
            hi, fhi = h, fh
            if side == -1:
                flo *= 0.5
            side = -1
    if not abs(fh) < cfg.root_tol:
        raise NoBracketError(f"secant polish stalled at |EP(h)| = {abs(fh):.3g}", ep.samples())
    slope = (ep(hi).value - ep(lo).value) / (hi - lo)
    return DimensionResult(law, h, (lo, hi), abs(fh), len(ep.cache), seed, slope,
                           ep(h).std_error, ep.samples())


@dataclass(frozen=True)
class SweepCell:
    a: float
    r: float
    seed: int
    result: DimensionResult | None
    error: str | None = None


def cell_seed(seed: int, index: int, cfg: Config) -> int:
    return seed ^ index if cfg.seed_policy == "per-cell" else seed


def _run_cell(args):
    a, r, seed, cfg = args
    try:
        return SweepCell(a, r, seed, find_bowen_zero(law_from_config(a, r, cfg), seed, cfg))
    except (ArithmeticError, ValueError) as exc:
        return SweepCell(a, r, seed, None, f"{type(exc).__name__}: {exc}")


def sweep_dimension(a_grid, r_grid, seed: int, cfg: Config = DEFAULT) -> list[SweepCell]:
    """find_bowen_zero on every (a, r) cell, r-major; failures are recorded per cell."""
    tasks = []
    for i, (r, a) in enumerate((r, a) for r in r_grid for a in a_grid):
        tasks.append((float(a), float(r), cell_seed(seed, i, cfg), cfg))
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_run_cell, tasks))
    return [_run_cell(t) for t in tasks]


@dataclass(frozen=True)
class SmoothnessReport:
    coefficients: np.ndarray
    max_residual: float
    noise_floor: float
    smooth: bool


def smoothness_diagnostic(x, h, noise, degree: int = 6) -> SmoothnessReport:
    """Chebyshev fit of h(x); smooth iff max residual < 3 x median noise."""
    x, h, noise = (np.asarray(v, dtype=float) for v in (x, h, noise))
    if len(x) < 12:
        raise ValueError("need at least 12 samples")
    fit = Chebyshev.fit(x, h, degree)
    resid = float(np.max(np.abs(fit(x) - h)))
    floor = float(np.median(noise))
    return SmoothnessReport(fit.coef, resid, floor, resid < 3.0 * floor)


def smoothness_from_cells(cells: list[SweepCell], axis: str = "a") -> SmoothnessReport:
    ok = [c for c in cells if c.result is not None]
    x = [getattr(c, axis) for c in ok]
    return smoothness_diagnostic(x, [c.result.h for c in ok], [c.result.h_noise for c in ok])


@dataclass(frozen=True)
class SlopeReport:
    pairs: tuple
    slopes: np.ndarray
    std_errors: np.ndarray
    all_negative: bool
    max_slope: float
    gamma_hat: float
    bound_ok: bool


def pressure_slope_check(law: ParameterLaw, seed: int, t_pairs, cfg: Config = DEFAULT,
                         grid: LogPolarGrid | None = None) -> SlopeReport:
    """Finite-difference slopes of EP on one fiber versus the expansion floor."""
    fiber = sample_fiber(law, seed, cfg.steps, cfg.cert_iters)
    grid = grid or grid_from_config(cfg)
    l = BasePointFunctional(complex(cfg.xi0))
    slopes, errs = [], []
    for t0, t1 in t_pairs:
        tau = tau_schedule(min(t0, t1), cfg)
        e0 = estimate_expected_pressure(fiber, Potential(t0, tau), l, cfg, grid)
        e1 = estimate_expected_pressure(fiber, Potential(t1, tau), l, cfg, grid)
        slopes.append((e1.value - e0.value) / (t1 - t0))
        d = (e1.step_logs - e0.step_logs)[cfg.burn_in:] / (t1 - t0)
        errs.append(batch_means_error(d, cfg.batches))
    slopes, errs = np.array(slopes), np.array(errs)
    dom = grid.dom
    depth = cfg.expansion_depth
    etas = sample_fiber(law, seed + 1, cfg.audit_samples * depth // 10, cfg.cert_iters).etas
    etas = etas[: (len(etas) // depth) * depth].reshape(-1, depth)
    gamma = expansion_floor(etas, dom, seed)
    i = int(np.argmax(slopes))
    bound_ok = bool(np.all(np.abs(slopes) >= math.log(gamma) - 2 * errs))
    return SlopeReport(tuple(t_pairs), slopes, errs, bool(np.all(slopes < 0)),
                       float(slopes[i]), gamma, bound_ok)
