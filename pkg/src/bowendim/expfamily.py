"""Closed-form dynamics of the exponential family f(z) = eta * exp(z).

Everything here is elementary: preimages are logarithms, |f'| = |f|, and the
geometric potential weight only needs |z| and |w|.  The sampling routines
return small statistics objects used by the hypothesis audit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

TWO_PI = 2.0 * math.pi
E = math.e

# the exponential family has order 1 and balanced growth exponents (0, 1)
ORDER = 1.0
ALPHA1 = 0.0
ALPHA2 = 1.0

# branch indices drawn by the samplers below lie in [-SAMPLE_K, SAMPLE_K]
SAMPLE_K = 4


class DomainError(ValueError):
    """A point or parameter outside the region where the construction holds."""


class CertificateError(DomainError):
    """The orbit of the asymptotic value is not attracted to a fixed point."""


def attracting_fixed_point(eta: complex, max_iter: int = 2000, tol: float = 1e-13) -> complex:
    """Follow the orbit of 0 under eta*exp(z); return the attracting fixed point.

    At a fixed point f'(z) = f(z) = z, so attraction means |z| < 1.
    """
    z = 0j
    for _ in range(max_iter):
        try:
            nz = eta * cmath.exp(z)
        except OverflowError:
            break
        if abs(nz - z) <= tol * max(1.0, abs(nz)):
            if abs(nz) < 1.0:
                return nz
            break
        z = nz
    raise CertificateError(f"orbit of 0 under {eta}*exp(z) not attracted within {max_iter} steps")


def in_omega(eta: complex, b: float) -> bool:
    return 1.0 / (6 * E) < eta.real < 5.0 / (6 * E) and abs(eta.imag) < b


@dataclass(frozen=True)
class ExpParameter:
    """Multiplier eta of eta*exp(z), validated against Omega_b and certified hyperbolic."""

    eta: complex
    b: float = 0.02
    cert_iters: int = 2000
    fixed_point: complex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        eta = complex(self.eta)
        object.__setattr__(self, "eta", eta)
        if not in_omega(eta, self.b):
            raise DomainError(f"eta={eta} outside Omega_b with b={self.b}")
        object.__setattr__(self, "fixed_point", attracting_fixed_point(eta, self.cert_iters))

    @property
    def multiplier(self) -> float:
        return abs(self.fixed_point)


@dataclass(frozen=True)
class Potential:
    """Exponents (t, tau) of the geometric potential."""

    t: float
    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise DomainError(f"tau={self.tau} must lie in (0, 1)")
        if not self.t > ORDER / (ALPHA1 + ALPHA2):
            raise DomainError(f"t={self.t} must exceed 1")
        if not self.t * self.tau > ORDER:
            raise DomainError(f"t*tau={self.t * self.tau} must exceed 1 for summability")

    @property
    def s(self) -> float:
        """Half the decay exponent of the k-series, tau*t/2."""
        return 0.5 * self.tau * self.t

    @property
    def iterate_decay(self) -> float:
        """Decay exponent (1-tau)*t used for the tail model of operator images."""
        return (1.0 - self.tau) * self.t


@dataclass(frozen=True)
class HalfPlaneDomain:
    x_min: float = 1.0
    x_max: float = 31.5
    y_max: float = 1e12
    delta: float = 0.05
    delta0: float = 0.24

    def __post_init__(self):
        if self.x_min != 1.0:
            raise DomainError("U is the half-plane Re z > 1; x_min must be 1")
        if not 0.0 < self.delta <= self.delta0 < 0.25:
            raise DomainError("need 0 < delta <= delta0 < 1/4")
        need = math.log(math.hypot(self.x_max, self.y_max)) + math.log(6 * E) + 0.5
        if not self.x_max > need:
            raise DomainError(f"x_max={self.x_max} does not contain preimages (need > {need:.3f})")

    @property
    def radius(self) -> float:
        """Modulus cut-off of the grid, |z| <= y_max."""
        return self.y_max


def preimages(p: ExpParameter, w: complex, K: int) -> np.ndarray:
    """z_k = Log(w/eta) + 2 pi i k for k = -K..K."""
    w = complex(w)
    if w == 0:
        raise DomainError("0 is the omitted value and has no preimage")
    if abs(w) <= E * abs(p.eta):
        raise DomainError(f"|w|={abs(w):.4g} <= e|eta|; preimages would leave U")
    base = complex(np.log(w / p.eta))
    k = np.arange(-K, K + 1)
    return base + 1j * TWO_PI * k


def weight(pot: Potential, z, w):
    """|w|^-t * ((1+|z|^2)/(1+|w|^2))^(-tau t/2) with |f'(z)| = |w|."""
    az2 = np.abs(z) ** 2
    aw2 = np.abs(w) ** 2
    logv = -0.5 * pot.t * np.log(aw2) - pot.s * (np.log1p(az2) - np.log1p(aw2))
    return np.exp(logv)


def power_tail_integral(c2: float, y1: float, s: float) -> float:
    """Integral of (c2 + y^2)^(-s) over [y1, inf) for s > 1/2, any real y1."""
    if s <= 0.5:
        raise DomainError("integral diverges for s <= 1/2")
    a = s - 0.5
    full = special.beta(a, 0.5)
    v = y1 / math.sqrt(c2)
    half = 0.5 * full * special.betainc(a, 0.5, 1.0 / (1.0 + v * v))
    inner = half if v >= 0 else full - half
    return c2 ** (0.5 - s) * inner


def _unit_tail(v: float, s: float) -> float:
    return power_tail_integral(1.0, v, s)


def _int_from_log(logx: float) -> int:
    """ceil(exp(logx)) as an exact Python int, also beyond float range."""
    if logx < 700:
        return int(math.ceil(math.exp(logx)))
    e2 = logx / math.log(2.0)
    exp2 = int(e2)
    mant = 2.0 ** (e2 - exp2)
    return int(mant * 2 ** 52) << (exp2 - 52)


def truncation_order(pot: Potential, w: complex, eps_tail: float, eta: complex) -> int:
    """Smallest K whose integral tail bound is below eps_tail times the k = 0 term.

    The bound compares the monotone tail of the k-series with
    2 |w|^-t (1+|w|^2)^(tau t/2) * int_K^inf (1+(2 pi u - pi)^2)^(-tau t/2) du.
    Dividing by the k = 0 term leaves 2 I(K) < eps (1+|z_0|^2)^(-tau t/2), which
    is inverted through the incomplete beta function.  The tails are heavy, so
    for small eps the answer can be astronomically large; it is returned as an
    exact Python int.
    """
    if not eps_tail > 0:
        raise DomainError("eps_tail must be positive")
    s = pot.s
    if s <= 0.5:
        raise DomainError("k-series diverges for tau*t <= 1")
    if math.isinf(eps_tail):
        return 0
    z0 = complex(np.log(complex(w) / complex(eta)))
    # 2 I(K) = J(2 pi K - pi) / pi with J(v) = int_v^inf (1+x^2)^-s dx
    target = math.pi * eps_tail * (1.0 + abs(z0) ** 2) ** (-s)

    def ok(K: int) -> bool:
        return _unit_tail(TWO_PI * K - math.pi, s) < target

    if ok(0):
        return 0
    a = s - 0.5
    full = special.beta(a, 0.5)
    if target < 0.5 * full:
        x = special.betaincinv(a, 0.5, 2.0 * target / full)
        if x > 1e-280:
            v = math.sqrt(1.0 / x - 1.0)
            logv = math.log(v)
        else:
            # J(v) ~ v^(1-2s)/(2s-1) far out
            logv = math.log((2 * s - 1) * target) / (1 - 2 * s)
    else:
        x = special.betaincinv(a, 0.5, 2.0 * (full - target) / full)
        v = -math.sqrt(1.0 / x - 1.0)
        logv = None
    if logv is not None and logv > 30:
        # beyond 2^43 neighbouring integers are indistinguishable in the bound
        return _int_from_log(logv - math.log(TWO_PI)) + 1
    K = max(0, math.ceil((v + math.pi) / TWO_PI))
    while K > 0 and ok(K - 1):
        K -= 1
    while not ok(K):
        K += 1
    return K


# ---------------------------------------------------------------- sampling

def sample_domain(dom: HalfPlaneDomain, n: int, rng: np.random.Generator) -> np.ndarray:
    """Points of the truncated U.

    Half of the points are uniform in the box [1, 5] x [-4, 4] near the base
    point, half are spread over all scales with log|w| uniform on [0, log y_max].
    """
    n_core = n // 2
    core = (1.0 + 4.0 * rng.random(n_core)) + 1j * (8.0 * rng.random(n_core) - 4.0)
    far = []
    need = n - n_core
    logr = math.log(dom.radius)
    while need > 0:
        m = 2 * need + 16
        X = logr * rng.random(m)
        th = math.pi * (rng.random(m) - 0.5)
        pts = np.exp(X + 1j * th)
        pts = pts[pts.real > dom.x_min]
        far.append(pts[:need])
        need -= len(far[-1])
    return np.concatenate([core] + far)


def _branch(eta, w, k):
    return np.log(w / eta) + 1j * TWO_PI * k


@dataclass(frozen=True)
class PairingStats:
    max_ratio: float
    kappa: float
    contracts: bool
    n_samples: int


def _pairing_ratios(eta1, eta2, dom: HalfPlaneDomain, n: int, rng) -> np.ndarray:
    # base points of the pairings live in f^-1(U): every n-pairing with n >= 1
    # is built from such points, and on U itself |g'| only reaches 1
    v = sample_domain(dom, n, rng)
    k0 = rng.integers(-SAMPLE_K, SAMPLE_K + 1, n)
    w1 = _branch(eta1, v, k0)
    rho = dom.delta * np.sqrt(rng.random(n)) * (1.0 - 1e-12)
    w2 = w1 + rho * np.exp(1j * TWO_PI * rng.random(n))
    k = rng.integers(-SAMPLE_K, SAMPLE_K + 1, n)
    z1 = _branch(eta1, w1, k)
    z2 = _branch(eta2, w2, k)
    return np.abs(z1 - z2) / dom.delta


def pairing_contraction_sample(p1: ExpParameter, p2: ExpParameter, dom: HalfPlaneDomain,
                               n_samples: int, rng_seed: int) -> PairingStats:
    """Map random 0-pairings through matched branches of f_eta1, f_eta2; report max |z1-z2|/delta."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    ratios = _pairing_ratios(p1.eta, p2.eta, dom, n_samples, rng)
    m = float(ratios.max())
    return PairingStats(m, m, m < 1.0, n_samples)


def pairing_contraction_law(a: float, r: float, dom: HalfPlaneDomain, n_samples: int,
                            rng_seed: int, param_diameter: float) -> PairingStats:
    """Pairing contraction across a small parameter neighbourhood of the law.

    The family is parametrized by lambda = (a, r) acting on a fixed disk
    coordinate u, eta = a + r u.  Each sample draws u, then two parameter
    values within param_diameter/2 of (a, r) in each complex coordinate.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    u = np.sqrt(rng.random(n_samples)) * np.exp(1j * TWO_PI * rng.random(n_samples))

    def jitter():
        rad = 0.5 * param_diameter * np.sqrt(rng.random(n_samples))
        return rad * np.exp(1j * TWO_PI * rng.random(n_samples))

    eta1 = (a + jitter()) + (r + jitter()) * u
    eta2 = (a + jitter()) + (r + jitter()) * u
    ratios = _pairing_ratios(eta1, eta2, dom, n_samples, rng)
    m = float(ratios.max())
    return PairingStats(m, m, m < 1.0, n_samples)


@dataclass(frozen=True)
class DeformationStats:
    D_hat: float
    A_hat: float
    n_samples: int


def deformation_bound_sample(a: float, r: float, dom: HalfPlaneDomain, n_samples: int,
                             rng_seed: int, b: float = 0.02) -> DeformationStats:
    """Sup of |d g_k / d u| (eta = a + r u) and of |arg(f'(z1)/f'(z2))| over 1-pairings.

    The derivative uses a centred difference with step 1e-6 in u, i.e. 1e-6*r
    in eta.  Since f' = f, the argument statistic reads arg(w1/w2).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if not (in_omega(complex(a - r), b) and in_omega(complex(a + r), b) and r < b):
        raise DomainError(f"disk D({a}, {r}) not inside Omega_b")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    u = np.sqrt(rng.random(n_samples)) * np.exp(1j * TWO_PI * rng.random(n_samples))
    w = sample_domain(dom, n_samples, rng)
    k = rng.integers(-SAMPLE_K, SAMPLE_K + 1, n_samples)
    h = 1e-6
    if r == 0:
        D = 0.0
    else:
        zp = _branch(a + r * (u + h), w, k)
        zm = _branch(a + r * (u - h), w, k)
        deriv = np.abs(zp - zm) / (2 * h)
        if not np.all(np.isfinite(deriv)):
            raise DomainError("non-finite branch derivative; branch matching failed")
        D = float(deriv.max())
    rho = dom.delta * np.sqrt(rng.random(n_samples)) * (1.0 - 1e-12)
    w2 = w + rho * np.exp(1j * TWO_PI * rng.random(n_samples))
    eta1 = a + r * u
    u2 = np.sqrt(rng.random(n_samples)) * np.exp(1j * TWO_PI * rng.random(n_samples))
    eta2 = a + r * u2
    z1 = _branch(eta1, w, k)
    z2 = _branch(eta2, w2, k)
    fp1 = eta1 * np.exp(z1)
    fp2 = eta2 * np.exp(z2)
    A = float(np.abs(np.angle(fp1 / fp2)).max())
    return DeformationStats(D, A, n_samples)


@dataclass(frozen=True)
class GrowthStats:
    ratio_min: float
    ratio_max: float
    kappa_growth: float
    n_samples: int


def balanced_growth_check(p: ExpParameter, dom: HalfPlaneDomain, n_samples: int,
                          rng_seed: int) -> GrowthStats:
    """min/max of |f'(z)| / (1+|f(z)|^2)^(1/2) over z in f^-1(U)."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    w = sample_domain(dom, n_samples, rng)
    k = rng.integers(-SAMPLE_K, SAMPLE_K + 1, n_samples)
    z = _branch(p.eta, w, k)
    fz = p.eta * np.exp(z)
    fprime = fz  # f' = f for this family
    ratio = np.abs(fprime) / np.sqrt(1.0 + np.abs(fz) ** 2)
    lo, hi = float(ratio.min()), float(ratio.max())
    return GrowthStats(lo, hi, max(hi, 1.0 / lo), n_samples)


def expansion_floor(etas: np.ndarray, dom: HalfPlaneDomain, rng_seed: int) -> float:
    """min over sampled backward orbits of |(f^n)'(z)|^(1/n).

    ``etas`` has shape (n_samples, n): row i is the fiber segment of sample i,
    applied forward in column order.  The orbit starts at a random w in U and
    pulls back through columns n-1, ..., 0 with random branch indices.
    """
    etas = np.atleast_2d(np.asarray(etas, dtype=complex))
    m, n = etas.shape
    rng = np.random.Generator(np.random.Philox(rng_seed))
    w = sample_domain(dom, m, rng)
    logd = np.log(np.abs(w))
    cur = w
    for j in range(n - 1, -1, -1):
        k = rng.integers(-SAMPLE_K, SAMPLE_K + 1, m)
        cur = _branch(etas[:, j], cur, k)
        if j > 0:
            logd += np.log(np.abs(cur))
    return float(np.exp(logd.min() / n))
