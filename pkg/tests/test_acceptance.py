"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line; the lines are printed together at the
end of the pytest run.  Run alone with ``python tests/test_acceptance.py``.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from bowendim.config import DEFAULT
from bowendim.expfamily import Potential
from bowendim.operator import (BasePointFunctional, density_convergence_diagnostic,
                               grid_from_config, run_normalized)
from bowendim.oracle import TreeBudgetError, monolithic_log_mass, oracle_bowen, tree_pressure
from bowendim.pressure import (estimate_expected_pressure, find_bowen_zero, law_from_config,
                               smoothness_from_cells, sweep_dimension, tau_schedule)
from bowendim.randomdriver import ParameterLaw, sample_fiber
from bowendim.verify import run_hypothesis_audit

SEED = 7
L = BasePointFunctional(2.0)
SWEEP_CFG = DEFAULT.replace(steps=300, burn_in=50)

pytestmark = pytest.mark.acceptance


def verdict(report_line, n, ok, detail):
    report_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def grid():
    return grid_from_config(DEFAULT)


@pytest.fixture(scope="module")
def sweep_cells():
    a13 = [round(0.14 + 0.005 * i, 3) for i in range(13)]
    a7 = [round(0.14 + 0.01 * i, 2) for i in range(7)]
    row = sweep_dimension(a13, [0.01], SEED, SWEEP_CFG.replace(seed_policy="shared"))
    rest = sweep_dimension(a7, [0.0, 0.005], SEED, SWEEP_CFG)
    return row, rest


def test_c01_oracle_agreement(grid, report_line):
    pot = Potential(1.5, 0.9)
    fiber = sample_fiber(ParameterLaw(0.18), SEED, DEFAULT.steps)
    ep = estimate_expected_pressure(fiber, pot, L, DEFAULT, grid).value
    oracle = monolithic_log_mass([0.18] * 12, pot, 12)[-1] / 12
    gap = abs(ep - oracle)
    verdict(report_line, 1, gap < 1e-2,
            f"|EP - (1/12) log L^12 1| = {gap:.4g} (EP={ep:.6f}, depth-12 value={oracle:.6f}, "
            f"tol 1e-2)")


def test_c02_telescoping(report_line):
    pot = Potential(1.5, 0.9)
    etas = sample_fiber(ParameterLaw(0.18, 0.01), SEED, 8).etas
    sums, refs = [], []
    for nr, na in ((65, 33), (129, 65)):
        cfg = DEFAULT.replace(n_radial=nr, n_angular=na)
        logs, _, _ = run_normalized(etas, pot, grid_from_config(cfg), L, cfg.eps_tail)
        sums.append(logs.sum())
    for nx, ny in ((DEFAULT.oracle_nx, DEFAULT.oracle_ny),
                   (2 * DEFAULT.oracle_nx, 2 * DEFAULT.oracle_ny - 1)):
        cfg = DEFAULT.replace(oracle_nx=nx, oracle_ny=ny)
        refs.append(monolithic_log_mass(etas, pot, 8, cfg)[-1])
    # coarse-grid error <= 2 x (coarse - fine) for any convergence order >= 1
    disc = 2 * (abs(sums[0] - sums[1]) + abs(refs[0] - refs[1]))
    tol = 1e-6 + 8 * DEFAULT.eps_tail + disc
    gap = abs(sums[0] - refs[0])
    verdict(report_line, 2, gap < tol,
            f"|sum of 8 step logs - log L^8 1| = {gap:.3g} < {tol:.3g} "
            f"(1e-6 + truncation + discretization {disc:.3g})")


def test_c03_monotone_pressure(grid, report_line):
    ts = [round(1.1 + 0.1 * i, 1) for i in range(10)]
    cfg = DEFAULT.replace(steps=600)
    fiber = sample_fiber(law_from_config(0.18, 0.01), SEED, cfg.steps)
    eps = [estimate_expected_pressure(fiber, Potential(t, tau_schedule(t)), L, cfg, grid).value
           for t in ts]
    diffs = np.diff(eps)
    verdict(report_line, 3, bool(np.all(diffs < 0)),
            f"max consecutive EP difference over t=1.1..2.0 is {diffs.max():.4g} (< 0 required)")


def test_c04_tau_invariance(grid, report_line):
    fiber = sample_fiber(law_from_config(0.18, 0.01), SEED, DEFAULT.steps)
    a = estimate_expected_pressure(fiber, Potential(1.5, 0.85), L, DEFAULT, grid).value
    b = estimate_expected_pressure(fiber, Potential(1.5, 0.95), L, DEFAULT, grid).value
    verdict(report_line, 4, abs(a - b) < 2e-2,
            f"|EP(tau=0.85) - EP(tau=0.95)| = {abs(a - b):.3g} at t=1.5 (tol 2e-2)")


def test_c05_bowen_zero_sanity(sweep_cells, report_line):
    row, rest = sweep_cells
    cells = row + rest
    bad = [c for c in cells if c.result is None or not (1 < c.result.h < 2)
           or not c.result.residual < 5e-3]
    hs = [c.result.h for c in cells if c.result is not None]
    worst = max((c.result.residual for c in cells if c.result is not None), default=math.inf)
    verdict(report_line, 5, not bad,
            f"{len(cells) - len(bad)}/{len(cells)} cells with h in (1,2) and |EP(h)| < 5e-3; "
            f"h range [{min(hs):.4f}, {max(hs):.4f}], max |EP(h)| = {worst:.2g}")


def test_c06_autonomous_cross_validation(grid, report_line):
    law = ParameterLaw(0.18)
    h = find_bowen_zero(law, SEED, SWEEP_CFG, grid).h
    h_or = oracle_bowen(law, DEFAULT)
    verdict(report_line, 6, abs(h - h_or) < 1e-2,
            f"|h - h_oracle(depth 12)| = {abs(h - h_or):.4g} (h={h:.5f}, h_oracle={h_or:.5f}, "
            f"tol 1e-2)")


def test_c07_continuity_in_r(grid, report_line):
    cfg = DEFAULT.replace(steps=600)
    h0 = find_bowen_zero(law_from_config(0.18, 0.0), SEED, cfg, grid).h
    h1 = find_bowen_zero(law_from_config(0.18, 1e-3), SEED, cfg, grid).h
    verdict(report_line, 7, abs(h1 - h0) < 1e-2,
            f"|h(0.18, 1e-3) - h(0.18, 0)| = {abs(h1 - h0):.3g} (tol 1e-2)")


def test_c08_smoothness(sweep_cells, report_line):
    row, _ = sweep_cells
    ok = [c for c in row if c.result is not None]
    rep = smoothness_from_cells(ok)
    verdict(report_line, 8, rep.smooth and len(ok) == 13,
            f"degree-6 fit over {len(ok)} CRN points: max residual {rep.max_residual:.3g} "
            f"vs 3 x noise floor {3 * rep.noise_floor:.3g}")


def test_c09_convergence_speed(grid, report_line):
    etas = sample_fiber(law_from_config(0.18, 0.01), SEED, 2 * DEFAULT.n_probe).etas
    rep = density_convergence_diagnostic(etas, Potential(1.5, 0.9), L, DEFAULT.n_probe, grid)
    ok = rep.theta_hat < 1 and rep.r2 > 0.9
    verdict(report_line, 9, ok, f"theta_hat = {rep.theta_hat:.4f}, R^2 = {rep.r2:.4f}")


def test_c10_hypothesis_audit(report_line):
    rep = run_hypothesis_audit(law_from_config(0.18, DEFAULT.r_max), SEED)
    c = rep.constants()
    failed = [ch.name for ch in rep.checks if not ch.passed]
    detail = (f"kappa={c.get('kappa_hat', math.nan):.3f}, gamma={c.get('gamma_hat', math.nan):.3f}, "
              f"a={c.get('a_hat', math.nan):.3f}, D={c.get('D_hat', math.nan):.3g}, "
              f"A={c.get('A_hat', math.nan):.3g}, growth in [{c.get('ratio_min', math.nan):.3f}, "
              f"{c.get('ratio_max', math.nan):.3f}]")
    verdict(report_line, 10, rep.passed, detail + (f"; failed: {failed}" if failed else ""))


CLI_RUNS = {
    "pressure": ["pressure", "--a", "0.18", "--r", "0.01", "--t-grid", "1.3,1.6",
                 "--steps", "260", "--burn-in", "40"],
    "dimension": ["dimension", "--a", "0.18", "--r", "0.01", "--steps", "260", "--burn-in", "40"],
    "sweep": ["sweep", "--a-grid", "0.16,0.19", "--r-grid", "0.01", "--steps", "260",
              "--burn-in", "40"],
    "verify": ["verify", "--a", "0.18", "--r", "0.01", "--set", "audit_samples=2000",
               "--set", "audit_steps=260", "--set", "decay_steps=120"],
    "julia": ["julia", "--a", "0.18", "--r", "0.01", "--depth", "10", "--points", "4000"],
    "oracle": ["oracle", "--a", "0.18", "--r", "0.01", "--depth", "4"],
}


def _cli(argv, threads, out):
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    return subprocess.run([sys.executable, "-m", "bowendim"] + argv
                          + ["--threads", str(threads), "--out", str(out)],
                          env=env, capture_output=True).returncode


def test_c11_determinism(tmp_path, report_line):
    diffs = []
    for name, argv in CLI_RUNS.items():
        blobs = []
        for threads in (1, 4, 4):
            out = tmp_path / f"{name}-{threads}-{len(blobs)}"
            code = _cli(argv, threads, out)
            blobs.append((code, out.read_bytes() if out.exists() else None))
        if blobs[0][1] is None or any(b != blobs[0] for b in blobs):
            diffs.append(name)
    verdict(report_line, 11, not diffs,
            f"{len(CLI_RUNS) - len(diffs)}/{len(CLI_RUNS)} commands byte-identical across "
            f"threads 1/4 and repeated runs" + (f"; differing: {diffs}" if diffs else ""))


def _exhaustive(etas, pot, w0, K):
    import itertools

    n = len(etas)
    total = 0.0
    for chain in itertools.product(range(-K, K + 1), repeat=n):
        w, W = complex(w0), 1.0
        for d, k in enumerate(chain):
            z = complex(np.log(w / etas[n - 1 - d])) + 2j * math.pi * k
            W *= abs(w) ** -pot.t * ((1 + abs(z) ** 2) / (1 + abs(w) ** 2)) ** -pot.s
            w = z
        total += W
    return total


def test_c12_truncation_soundness(report_line):
    rng = np.random.Generator(np.random.Philox(key=SEED))
    sound, pruned_any = 0, 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        K = int(rng.integers(1, 9))
        law = ParameterLaw(float(0.13 + 0.1 * rng.random()), 0.01)
        etas = list(sample_fiber(law, int(rng.integers(1 << 30)), n).etas)
        w0 = complex(1.2 + 4 * rng.random(), 6 * rng.random() - 3)
        pot = Potential(float(1.2 + 0.8 * rng.random()), float(0.9 + 0.09 * rng.random()))
        budget = int(rng.integers(5, 200))
        try:
            r = tree_pressure(etas, pot, w0, n, 1e-3, budget, k_max=K)
        except TreeBudgetError as err:
            r = err.partial
        exact = _exhaustive(etas, pot, w0, K)
        kept = math.exp(r.log_value)
        true_pruned = exact - kept
        pruned_any += true_pruned > 1e-12 * exact
        # summation order alone moves the totals by about 1e-16 relative
        sound += r.pruned_mass_bound >= true_pruned - 1e-12 * exact
    verdict(report_line, 12, sound == 100,
            f"pruned-mass bound >= true pruned mass in {sound}/100 instances "
            f"({pruned_any} with nonzero pruning)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
