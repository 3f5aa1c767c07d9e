"""Backward-orbit sampling of fiber radial Julia sets and histogram rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .config import DEFAULT
from .expfamily import TWO_PI, DomainError, Potential
from .randomdriver import FiberSequence

K_EXPLICIT = 32


@dataclass(frozen=True)
class JuliaSample:
    fiber: FiberSequence
    points: np.ndarray = field(repr=False)
    depth: int
    bound_M: float
    seeds: np.ndarray = field(repr=False)
    residuals: tuple = ()
    step_residuals: tuple = ()

    def __len__(self) -> int:
        return len(self.points)


def branch_orders(pot: Potential, w: np.ndarray, eta: complex, eps_tail: float) -> np.ndarray:
    """Vectorized truncation orders K(w) for the k-series (float, may be huge)."""
    s = pot.s
    a = s - 0.5
    full = special.beta(a, 0.5)
    z0 = np.log(w / eta)
    target = math.pi * eps_tail * (1.0 + np.abs(z0) ** 2) ** (-s)
    q = np.clip(2.0 * target / full, 0.0, 1.0)
    x = special.betaincinv(a, 0.5, q)
    with np.errstate(divide="ignore"):
        v = np.sqrt(np.maximum(1.0 / x - 1.0, 0.0))
    v = np.where(q >= 1.0, 0.0, v)
    return np.ceil((v + math.pi) / TWO_PI)


def _tail_cdf(c2, y, a):
    # regularized mass of (c2+Y^2)^-s beyond y >= 0, up to a common factor
    return special.betainc(a, 0.5, c2 / (c2 + y * y)) * c2 ** (-a)


def _draw_branches(pot, w, eta, eps_tail, rng) -> np.ndarray:
    n = len(w)
    s = pot.s
    a = s - 0.5
    z0 = np.log(w / eta)
    c2 = 1.0 + z0.real ** 2
    phi = z0.imag
    K = branch_orders(pot, w, eta, eps_tail)
    ks = np.arange(-K_EXPLICIT, K_EXPLICIT + 1)
    Y = phi[:, None] + TWO_PI * ks[None, :]
    p = (c2[:, None] + Y * Y) ** (-s)
    p[np.abs(ks)[None, :] > K[:, None]] = 0.0
    # continuous tails for |k| > K_EXPLICIT, both sides, cut at K
    scale = 0.5 * special.beta(a, 0.5) / TWO_PI
    y_in = TWO_PI * (K_EXPLICIT + 0.5) + np.array([1.0, -1.0])[:, None] * phi
    y_out = TWO_PI * (K + 0.5) + np.array([1.0, -1.0])[:, None] * phi
    live = K > K_EXPLICIT
    hi_q = _tail_cdf(c2, y_in, a)
    lo_q = np.where(live, _tail_cdf(c2, np.minimum(y_out, 1e300), a), hi_q)
    tails = scale * (hi_q - lo_q)
    weights = np.concatenate([p, tails.T], axis=1)
    cum = np.cumsum(weights, axis=1)
    u = rng.random(n) * cum[:, -1]
    pick = (cum < u[:, None]).sum(axis=1)
    pick = np.minimum(pick, weights.shape[1] - 1)
    k = np.empty(n, dtype=np.float64)
    exp = pick < len(ks)
    k[exp] = ks[pick[exp]]
    v = rng.random(n)
    for side, sign in ((0, 1.0), (1, -1.0)):
        m = pick == len(ks) + side
        if not m.any():
            continue
        q = lo_q[side, m] + v[m] * (hi_q[side, m] - lo_q[side, m])
        x = special.betaincinv(a, 0.5, q * c2[m] ** a)
        y = np.sqrt(c2[m] * (1.0 / x - 1.0))
        kk = np.rint((sign * y - phi[m]) / TWO_PI)
        lim = np.minimum(K[m], 2.0 ** 52)
        k[m] = sign * np.clip(sign * kk, K_EXPLICIT + 1, lim)
    return k


def backward_orbit_sample(fiber: FiberSequence, n_points: int, depth: int, seed: int,
                          t: float = DEFAULT.julia_t, eps_tail: float = DEFAULT.julia_eps_tail,
                          xi0: float = DEFAULT.xi0, delta: float = DEFAULT.delta) -> JuliaSample:
    """Pull n_points seeds near xi0 back through f_{eta_{depth-1}}, ..., f_{eta_0}.

    The branch index k at each pull-back is drawn with probability
    proportional to the potential weight at exponent t, restricted to
    |k| <= K(w).  Indices up to 32 are drawn exactly; beyond that the
    series is replaced by its integral and sampled through the inverse
    incomplete beta function.
    """
    from .pressure import tau_schedule

    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > fiber.N:
        raise ValueError(f"fiber of length {fiber.N} shorter than depth {depth}")
    if n_points < 1:
        raise ValueError("need at least one point")
    pot = Potential(t, tau_schedule(t))
    rng = np.random.Generator(np.random.Philox(key=seed))
    rho = delta * np.sqrt(rng.random(n_points)) * (1.0 - 1e-9)
    seeds = xi0 + rho * np.exp(1j * TWO_PI * rng.random(n_points))
    levels = [seeds]
    w = seeds
    for j in range(depth - 1, -1, -1):
        eta = complex(fiber.etas[j])
        k = _draw_branches(pot, w, eta, eps_tail, rng)
        w = np.log(w / eta) + 1j * TWO_PI * k
        levels.append(w)
    if not np.all(w.real > 1.0):
        raise DomainError("backward orbit left U")
    return JuliaSample(fiber, w, depth, abs(xi0) + delta, seeds,
                       round_trip_residuals(fiber, levels), step_residuals(fiber, levels))


def round_trip_residuals(fiber: FiberSequence, levels) -> tuple:
    """max |forward image - backward point| after each forward step.

    Forward iteration is expanding, so rounding in the deep points grows
    roughly like the product of |z| along the orbit; overflow reads as inf.
    """
    depth = len(levels) - 1
    z = levels[-1]
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(depth):
            z = fiber.etas[m] * np.exp(z)
            r = float(np.max(np.abs(z - levels[depth - 1 - m])))
            out.append(r if math.isfinite(r) else math.inf)
    return tuple(out)


def step_residuals(fiber: FiberSequence, levels) -> tuple:
    """Relative one-step consistency max |f(z_{j+1}) - z_j| / |z_j| for each link."""
    depth = len(levels) - 1
    out = []
    for m in range(depth):
        hi, lo = levels[depth - m], levels[depth - 1 - m]
        out.append(float(np.max(np.abs(fiber.etas[m] * np.exp(hi) - lo) / np.abs(lo))))
    return tuple(out)


@dataclass(frozen=True)
class Raster:
    counts: np.ndarray
    window: tuple
    resolution: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def gray(self) -> np.ndarray:
        c = self.counts
        top = c.max()
        if top == 0:
            return np.zeros(c.shape, dtype=np.uint8)
        g = 1 + np.floor(254.0 * np.log1p(c) / math.log1p(top))
        return np.where(c > 0, g, 0).astype(np.uint8)

    def to_pgm(self, comment: str = "") -> bytes:
        h, w = self.counts.shape
        head = "P5\n"
        for line in comment.splitlines():
            head += f"# {line}\n"
        head += f"{w} {h}\n255\n"
        return head.encode("ascii") + self.gray().tobytes()


def rasterize(sample, window=DEFAULT.window, resolution=DEFAULT.resolution) -> Raster:
    """Histogram of the sample over window = (x0, x1, y0, y1); row 0 is the top edge."""
    pts = np.asarray(getattr(sample, "points", sample), dtype=complex).ravel()
    if len(pts) == 0:
        raise ValueError("empty sample")
    x0, x1, y0, y1 = map(float, window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"empty window {window}")
    nx, ny = map(int, resolution)
    if nx < 1 or ny < 1:
        raise ValueError(f"bad resolution {resolution}")
    H, _, _ = np.histogram2d(pts.imag, pts.real, bins=(ny, nx), range=((y0, y1), (x0, x1)))
    return Raster(H[::-1].astype(np.int64), (x0, x1, y0, y1), (nx, ny))
