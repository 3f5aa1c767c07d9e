from pathlib import Path

import numpy as np
import pytest

from bowendim.expfamily import Potential, truncation_order
from bowendim.julia import backward_orbit_sample, branch_orders, rasterize
from bowendim.randomdriver import ParameterLaw, sample_fiber

GOLDEN = Path(__file__).parent / "golden" / "julia_a0.18_r0.01_s7_d25.pgm"


@pytest.fixture(scope="module")
def fiber():
    return sample_fiber(ParameterLaw(0.18, 0.01), 7, 25)


def test_depth_zero_returns_seeds(fiber):
    s = backward_orbit_sample(fiber, 100, 0, 1)
    assert np.array_equal(s.points, s.seeds)
    assert np.all(np.abs(s.seeds - 2.0) < 0.05)


def test_points_in_U_and_round_trip(fiber):
    s = backward_orbit_sample(fiber, 5000, 8, 2)
    assert np.all(s.points.real > 1)
    assert len(s.residuals) == 8
    # the composed round trip is limited by forward expansion; the shallow levels close
    assert max(s.step_residuals) < 1e-5
    shallow = backward_orbit_sample(fiber, 5000, 2, 2)
    assert shallow.residuals[-1] <= 0.05


def test_branch_orders_match_scalar_orders():
    pot = Potential(1.5, 0.95)
    w = np.array([2.0 + 0j, 5 + 3j, 100 + 1e4j])
    K = branch_orders(pot, w, 0.18, 1e-3)
    assert [int(k) for k in K] == [truncation_order(pot, x, 1e-3, 0.18) for x in w]


def test_single_point_single_pixel():
    r = rasterize([3.0 + 0.1j])
    assert np.count_nonzero(r.counts) == 1 and r.total == 1


def test_doubling_resolution_preserves_mass(fiber):
    s = backward_orbit_sample(fiber, 4000, 6, 3)
    a = rasterize(s, (1, 7, -3, 3), (100, 100))
    b = rasterize(s, (1, 7, -3, 3), (200, 200))
    assert a.total == b.total > 0
    assert np.array_equal(b.counts.reshape(100, 2, 100, 2).sum(axis=(1, 3)), a.counts)


def test_rejects_empty_window_and_sample():
    with pytest.raises(ValueError):
        rasterize([2 + 0j], (1, 1, -1, 1))
    with pytest.raises(ValueError):
        rasterize([])


def test_pgm_layout():
    r = rasterize([3.0 + 0.1j, 3.0 + 0.1j, 5 - 2j], (1, 7, -3, 3), (6, 4))
    blob = r.to_pgm("hello")
    assert blob.startswith(b"P5\n# hello\n6 4\n255\n")
    body = np.frombuffer(blob[-24:], dtype=np.uint8).reshape(4, 6)
    assert body.max() == 255 and np.count_nonzero(body) == 2


def test_golden_image(fiber):
    s = backward_orbit_sample(fiber, 20000, 25, 7)
    assert rasterize(s).to_pgm() == GOLDEN.read_bytes()
