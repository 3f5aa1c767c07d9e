import math

import numpy as np
import pytest

from bowendim.config import DEFAULT
from bowendim.expfamily import Potential
from bowendim.operator import BasePointFunctional, grid_from_config
from bowendim.pressure import (
    TAU_CAP, NoBracketError, batch_means_error, cell_seed, estimate_expected_pressure,
    find_bowen_zero, pressure_slope_check, smoothness_diagnostic, sweep_dimension, tau_schedule,
)
from bowendim.randomdriver import ParameterLaw, sample_fiber

FAST = DEFAULT.replace(steps=260, burn_in=40, audit_samples=2000)


@pytest.fixture(scope="module")
def grid():
    return grid_from_config(DEFAULT)


def test_tau_schedule():
    assert tau_schedule(1.5) == 0.95
    assert tau_schedule(1.02) == TAU_CAP
    assert 1.03 * tau_schedule(1.03) > 1


def test_batch_means_iid():
    x = np.random.default_rng(0).normal(0.0, 2.0, 40000)
    assert batch_means_error(x, 20) == pytest.approx(2.0 / math.sqrt(40000), rel=0.4)


def test_estimate_requires_long_fiber(grid):
    fiber = sample_fiber(ParameterLaw(0.18), 1, 100)
    with pytest.raises(ValueError):
        estimate_expected_pressure(fiber, Potential(1.5, 0.95), BasePointFunctional(2.0), FAST,
                                   grid)


def test_autonomous_pressure_is_step_limit(grid):
    fiber = sample_fiber(ParameterLaw(0.18), 1, 260)
    est = estimate_expected_pressure(fiber, Potential(1.5, 0.95), BasePointFunctional(2.0), FAST,
                                     grid)
    # for a single map the normalized step log converges geometrically
    assert np.ptp(est.step_logs[40:]) < 1e-10
    assert est.std_error < 1e-10


def test_bowen_zero_small_run(grid):
    res = find_bowen_zero(ParameterLaw(0.18, 0.01), 7, FAST, grid)
    assert 1 < res.h < 2
    assert res.residual < FAST.polish_tol
    assert res.bracket[0] <= res.h <= res.bracket[1]
    assert res.slope < 0 and math.isfinite(res.h_noise)
    assert res.evaluations == len(res.samples)


def test_no_bracket_reported(grid):
    cfg = FAST.replace(t_lo=1.05, t_hi=1.1, t_max=1.15)
    with pytest.raises(NoBracketError) as err:
        find_bowen_zero(ParameterLaw(0.18), 7, cfg, grid)
    assert len(err.value.samples) >= 2


def test_sweep_single_cell_equals_dimension(grid):
    cells = sweep_dimension([0.18], [0.01], 7, FAST)
    direct = find_bowen_zero(ParameterLaw(0.18, 0.01), 7, FAST, grid)
    assert cells[0].seed == 7 and cells[0].result.h == direct.h


def test_cell_seed_policy():
    assert cell_seed(7, 3, DEFAULT) == 7 ^ 3
    assert cell_seed(7, 3, DEFAULT.replace(seed_policy="shared")) == 7


def test_smoothness_diagnostic():
    x = np.linspace(0.14, 0.20, 13)
    h = 1.2 + 0.3 * (x - 0.17) - 2.0 * (x - 0.17) ** 2
    assert smoothness_diagnostic(x, h, np.full(13, 1e-6)).smooth
    kink = h + 1e-3 * (x > 0.171)
    assert not smoothness_diagnostic(x, kink, np.full(13, 1e-6)).smooth
    with pytest.raises(ValueError):
        smoothness_diagnostic(x[:5], h[:5], np.ones(5))


def test_slopes_negative_and_bounded(grid):
    rep = pressure_slope_check(ParameterLaw(0.18, 0.01), 7, [(1.3, 1.4), (1.6, 1.7)], FAST, grid)
    assert rep.all_negative and rep.max_slope < 0
    assert rep.gamma_hat > 1 and rep.bound_ok
