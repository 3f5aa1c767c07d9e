"""Seeded i.i.d. parameter sequences drawn uniformly from a disk D(a, r).

The generator is numpy's Philox4x64 counter-based bit generator keyed by the
seed.  Draw n uses counter block n, so a sequence of length N is a prefix of
every longer sequence with the same seed, and results do not depend on how
work is scheduled.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .expfamily import CertificateError, DomainError, ExpParameter, attracting_fixed_point

LAW_A_MIN = 1.0 / (3 * math.e)
LAW_A_MAX = 2.0 / (3 * math.e)


@dataclass(frozen=True)
class ParameterLaw:
    a: float
    r: float = 0.0
    b: float = 0.02
    complex_disk: bool = True

    def __post_init__(self):
        if not LAW_A_MIN < self.a < LAW_A_MAX:
            raise DomainError(f"a={self.a} outside (1/(3e), 2/(3e))")
        if self.r < 0:
            raise DomainError("r must be nonnegative")
        # the open disk sits in the open strip |Im| < b/2 iff r <= b/2
        inside = (self.r <= 0.5 * self.b and self.a - self.r >= 1.0 / (6 * math.e)
                  and self.a + self.r <= 5.0 / (6 * math.e))
        if not inside:
            raise DomainError(f"D({self.a}, {self.r}) not inside Omega_b/2 for b={self.b}")


def unit_draws(seed: int, N: int) -> np.ndarray:
    """(N, 2) uniforms on [0, 1); row n depends only on (seed, n)."""
    gen = np.random.Generator(np.random.Philox(key=seed & (2 ** 64 - 1)))
    return gen.random((N, 2))


def disk_points(U: np.ndarray) -> np.ndarray:
    return np.sqrt(U[:, 0]) * np.exp(2j * math.pi * U[:, 1])


@dataclass(frozen=True)
class FiberSequence:
    law: ParameterLaw
    seed: int
    N: int
    etas: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.N

    def parameters(self) -> list[ExpParameter]:
        return [ExpParameter(e, self.law.b) for e in self.etas]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("index,re_eta,im_eta\n")
        for n, e in enumerate(self.etas):
            out.write(f"{n},{float(e.real)!r},{float(e.imag)!r}\n")
        return out.getvalue()


def _certify(etas: np.ndarray, cert_iters: int) -> None:
    seen: set[complex] = set()
    for e in etas:
        e = complex(e)
        if e in seen:
            continue
        seen.add(e)
        try:
            attracting_fixed_point(e, cert_iters)
        except CertificateError as exc:
            raise CertificateError(f"sampled eta={e!r} fails the hyperbolicity certificate") from exc


def sample_fiber(law: ParameterLaw, seed: int, N: int, cert_iters: int = 2000) -> FiberSequence:
    if N < 1:
        raise ValueError("N must be at least 1")
    U = unit_draws(seed, N)
    if law.complex_disk:
        etas = law.a + law.r * disk_points(U)
    else:
        etas = (law.a + law.r * (2.0 * U[:, 0] - 1.0)).astype(complex)
    _certify(etas, cert_iters)
    etas.setflags(write=False)
    return FiberSequence(law, seed, N, etas)


@dataclass(frozen=True)
class SharedFiber:
    """One fiber reused for every t in t_values."""

    fiber: FiberSequence
    t_values: tuple


def common_random_numbers(law: ParameterLaw, seed: int, N: int, t_values) -> SharedFiber:
    t_values = tuple(t_values)
    if not t_values:
        raise ValueError("t_values must be nonempty")
    return SharedFiber(sample_fiber(law, seed, N), t_values)
