import math
from fractions import Fraction as F

import numpy as np
import pytest

from brwcompete import fixtures as fx
from brwcompete.laws import ReproductionLaw, min_coupling_law, nearest_neighbor_law
from brwcompete.shape import (
    compare_speeds,
    direction_grid,
    estimate_shape,
    estimate_speed,
    projection_runs,
    speed_from_projections,
)


def test_mover_speed_exact():
    along = estimate_speed(fx.mover(), (1, 0), 20, 5, validate=False)
    assert along.tau_hat == pytest.approx(1.0, abs=1e-9) and along.standard_error == pytest.approx(0, abs=1e-9)
    assert along.time_constant == pytest.approx(1.0)
    ortho = estimate_speed(fx.mover(), (0, 1), 20, 5, validate=False)
    assert ortho.tau_hat == 0 and ortho.insufficient and ortho.time_constant == math.inf


def test_speed_bounded_by_rho_max():
    law = fx.blue_east_jumper()
    for x in direction_grid(2, 1):
        est = estimate_speed(law, x, 15, 10, seed=3)
        assert 0 <= est.tau_hat <= 2


def test_direction_grid():
    g = direction_grid(2, 1)
    assert len(g) == 8 and (0, 0) not in g
    assert (2, 2) not in direction_grid(2, 2) and (2, 1) in direction_grid(2, 2)


def test_hitting_curve_monotone():
    est = estimate_speed(nearest_neighbor_law(2), (1, 0), 20, 10, seed=1)
    times = [h for _, h in est.hitting_curve]
    assert times == sorted(times) and est.hitting_curve[0][0] == 1


def test_projection_runs_monotone_and_shape():
    proj = projection_runs(nearest_neighbor_law(2), [(1, 0), (1, 1)], 10, 4, seed=2)
    assert proj.shape == (4, 11, 2)
    assert (np.diff(proj, axis=1) >= 0).all()
    assert (proj[:, 0, 0] == 0).all()


def test_shape_symmetric_law_is_symmetric():
    shp = estimate_shape(nearest_neighbor_law(2), 20, 30, seed=4)
    axis = [shp.radial[x] for x in [(1, 0), (-1, 0), (0, 1), (0, -1)]]
    se = max(shp.standard_error[x] for x in [(1, 0), (-1, 0), (0, 1), (0, -1)])
    assert max(axis) - min(axis) < 6 * se + 1e-9


def test_compare_identical_laws_no_difference():
    law = nearest_neighbor_law(2)
    res = compare_speeds(law, law, [(1, 0), (0, 1)], 20, 30, seed=8)
    assert all(abs(c.z) < 4 for c in res)


def test_insufficient_radius():
    proj = np.zeros((3, 5), dtype=np.int64)
    est = speed_from_projections(proj, (1, 0), 1.0)
    assert est.insufficient and est.tau_hat == 0


def test_mover_radial_profile():
    shp = estimate_shape(fx.mover(), 12, 3, validate=False, directions=[(1, 0), (-1, 0), (0, 1)])
    assert shp.radial[(1, 0)] == 1.0 and shp.radial[(-1, 0)] == 0.0 and shp.radial[(0, 1)] == 0.0


def test_radial_profile_stable_across_horizons():
    law = nearest_neighbor_law(2)
    a = estimate_shape(law, 20, 20, seed=1)
    b = estimate_shape(law, 30, 20, seed=2)
    for x in a.directions:
        assert 0.8 <= a.radial[x] / b.radial[x] <= 1.25


def test_scaling_invariance():
    law = fx.blue_east_jumper()
    for x in [(1, 0), (1, 1), (2, -1)]:
        a = estimate_speed(law, x, 15, 8, seed=6)
        b = estimate_speed(law, tuple(3 * c for c in x), 15, 8, seed=6)
        assert a.tau_hat == pytest.approx(b.tau_hat, abs=1e-12)


def test_min_coupled_not_faster():
    red = nearest_neighbor_law(2, {2: F(1, 2), 4: F(1, 2)})
    blue = nearest_neighbor_law(2, {2: 1})
    low = min_coupling_law(red, blue)
    dirs = [(1, 0), (1, 1), (0, -1)]
    for x in dirs:
        a = estimate_speed(low, x, 16, 15, seed=10)
        b = estimate_speed(red, x, 16, 15, seed=11)
        assert a.tau_hat <= b.tau_hat + 3 * math.hypot(a.standard_error, b.standard_error)


def test_mover_speed_difference():
    slow = ReproductionLaw.make(2, {1: 1}, {(1, 0): 1})
    fast = ReproductionLaw.make(2, {1: 1}, {(2, 0): 1})
    (c,) = compare_speeds(slow, fast, [(1, 0)], 20, 4, validate=False)
    assert c.tau_blue - c.tau_red == pytest.approx(1.0, abs=1e-9)
