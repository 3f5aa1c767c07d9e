"""Numeric audit of the standing hypotheses for a parameter law.

Each check measures a few constants on samples and compares them with a
configured threshold.  A check that raises is recorded as failed with the
error text; the audit itself always completes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import DEFAULT, Config
from .expfamily import (ExpParameter, Potential, balanced_growth_check, deformation_bound_sample,
                        expansion_floor, pairing_contraction_law)
from .operator import BasePointFunctional, density_convergence_diagnostic, eval, grid_from_config, \
    run_normalized
from .randomdriver import ParameterLaw, sample_fiber

INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class AuditCheck:
    name: str
    measured: dict
    threshold: str
    passed: bool
    error: str | None = None


@dataclass(frozen=True)
class AuditReport:
    law: ParameterLaw
    seed: int
    checks: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def constants(self) -> dict:
        out = {}
        for c in self.checks:
            out.update(c.measured)
        return out

    def to_json(self) -> str:
        doc = {"law": asdict(self.law), "seed": self.seed, "passed": self.passed,
               "checks": [asdict(c) for c in self.checks]}
        return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable)

    def summary(self) -> str:
        lines = [f"audit a={self.law.a} r={self.law.r} seed={self.seed}"]
        for c in self.checks:
            vals = ", ".join(f"{k}={_fmt(v)}" for k, v in c.measured.items())
            tag = "PASS" if c.passed else "FAIL"
            extra = f"  [{c.error}]" if c.error else ""
            lines.append(f"  {tag} {c.name}: {vals} ({c.threshold}){extra}")
        lines.append("all checks pass" if self.passed else "some checks failed")
        return "\n".join(lines)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(type(v))


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _finite(*xs) -> bool:
    return all(math.isfinite(x) for x in xs)


def check_expansion(law, seed, cfg, dom) -> AuditCheck:
    depth = cfg.expansion_depth
    m = int(cfg.audit_samples)
    etas = sample_fiber(law, seed + 1, m * depth, cfg.cert_iters).etas.reshape(m, depth)
    gamma = expansion_floor(etas, dom, seed)
    gamma1 = expansion_floor(etas[:, :1], dom, seed)
    return AuditCheck("expansion", {"gamma_hat": gamma, "gamma_hat_1": gamma1}, "gamma_hat > 1",
                      gamma > 1.0 and gamma1 > 1.0)


def check_pairing(law, seed, cfg, dom) -> AuditCheck:
    st = pairing_contraction_law(law.a, law.r, dom, int(cfg.audit_samples), seed + 2,
                                 cfg.param_diameter)
    return AuditCheck("pairing", {"kappa_hat": st.kappa}, f"kappa_hat < {cfg.kappa_max}",
                      st.kappa < cfg.kappa_max)


def check_deformation(law, seed, cfg, dom) -> AuditCheck:
    st = deformation_bound_sample(law.a, law.r, dom, int(cfg.audit_samples), seed + 3, cfg.b)
    return AuditCheck("deformation", {"D_hat": st.D_hat, "A_hat": st.A_hat},
                      "D_hat, A_hat finite", _finite(st.D_hat, st.A_hat))


def check_growth(law, seed, cfg, dom) -> AuditCheck:
    lo, hi = math.inf, -math.inf
    for eta in sorted({law.a - law.r, law.a, law.a + law.r}):
        st = balanced_growth_check(ExpParameter(eta, cfg.b, cfg.cert_iters), dom,
                                   int(cfg.audit_samples), seed + 4)
        lo, hi = min(lo, st.ratio_min), max(hi, st.ratio_max)
    kappa = max(hi, 1.0 / lo)
    return AuditCheck("balanced_growth", {"ratio_min": lo, "ratio_max": hi, "kappa_growth": kappa},
                      "ratio in (1/sqrt 2, 1]", INV_SQRT2 < lo and hi <= 1.0)


def check_operator_bounds(law, seed, cfg, grid, pot, l) -> AuditCheck:
    fiber = sample_fiber(law, seed, cfg.audit_steps, cfg.cert_iters)
    logs, _, sups = run_normalized(fiber.etas, pot, grid, l, cfg.eps_tail, track_sup=True)
    B = min(cfg.burn_in, len(logs) - 1)
    M = float(sups.max())
    # base-point value of each normalized iterate relative to its sup
    a_hat = float((1.0 / sups[B:]).min())
    step_min = float(np.exp(logs[B:]).min())
    ok = M <= cfg.m_cap and a_hat > 0 and step_min > 0 and _finite(M, a_hat)
    return AuditCheck("operator_bounds", {"M_hat": M, "a_hat": a_hat, "min_step_factor": step_min},
                      f"M_hat <= {cfg.m_cap:g}, a_hat > 0", ok)


def density_decay_slope(law, seed, cfg, grid, pot, l) -> float:
    fiber = sample_fiber(law, seed, cfg.decay_steps, cfg.cert_iters)
    _, g, _ = run_normalized(fiber.etas, pot, grid, l, cfg.eps_tail)
    y = np.geomspace(10.0, 0.5 * cfg.y_max, 64)
    z = cfg.xi0 + 1j * y
    vals = np.asarray(eval(g, z))
    if not np.all(vals > 0):
        raise ArithmeticError("density not positive along the ray")
    slope, _ = np.polyfit(np.log1p(np.abs(z)), np.log(vals), 1)
    return float(slope)


def check_density_decay(law, seed, cfg, grid, pot, l) -> AuditCheck:
    slope = density_decay_slope(law, seed, cfg, grid, pot, l)
    return AuditCheck("density_decay", {"decay_slope": slope, "minus_tau_t": -pot.tau * pot.t},
                      f"slope <= -{cfg.decay_eps}", slope <= -cfg.decay_eps)


def check_convergence(law, seed, cfg, grid, pot, l) -> AuditCheck:
    fiber = sample_fiber(law, seed, 2 * cfg.n_probe, cfg.cert_iters)
    rep = density_convergence_diagnostic(fiber.etas, pot, l, cfg.n_probe, grid, cfg.eps_tail)
    ok = rep.theta_hat < 1.0 and rep.r2 > cfg.theta_r2
    return AuditCheck("convergence", {"theta_hat": rep.theta_hat, "r2": rep.r2,
                                      "n_fitted": rep.n_fitted},
                      f"theta_hat < 1, R^2 > {cfg.theta_r2}", bool(ok))


def run_hypothesis_audit(law: ParameterLaw, seed: int, cfg: Config = DEFAULT) -> AuditReport:
    # re-validate in case the law was built around the constructor checks
    law = ParameterLaw(law.a, law.r, law.b, law.complex_disk)
    grid = grid_from_config(cfg)
    dom = grid.dom
    pot = Potential(cfg.audit_t, cfg.audit_tau)
    l = BasePointFunctional(complex(cfg.xi0))
    plan = [
        ("expansion", lambda: check_expansion(law, seed, cfg, dom)),
        ("pairing", lambda: check_pairing(law, seed, cfg, dom)),
        ("deformation", lambda: check_deformation(law, seed, cfg, dom)),
        ("balanced_growth", lambda: check_growth(law, seed, cfg, dom)),
        ("operator_bounds", lambda: check_operator_bounds(law, seed, cfg, grid, pot, l)),
        ("density_decay", lambda: check_density_decay(law, seed, cfg, grid, pot, l)),
        ("convergence", lambda: check_convergence(law, seed, cfg, grid, pot, l)),
    ]
    checks = []
    for name, run in plan:
        try:
            checks.append(run())
        except (ArithmeticError, ValueError) as exc:
            checks.append(AuditCheck(name, {}, "", False, f"{type(exc).__name__}: {exc}"))
    return AuditReport(law, seed, tuple(checks))
