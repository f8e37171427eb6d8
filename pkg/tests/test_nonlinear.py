import csv
import math

import numpy as np
import pytest

from gevreylab.nonlinear import bilinear_ratio, solve_nonlinear, x_norm
from gevreylab.pipeline import solve_linearized


def test_zero_data_fixed_point(params, grid, shear_profile):
    phi0 = np.zeros((grid.n_x, grid.n_y), complex)
    out = solve_nonlinear(shear_profile, phi0, params=params, m_max=3)
    assert out["x_norm"] == 0.0
    assert out["in_ball"]
    assert np.max(np.abs(out["trajectory"].omega.data)) == 0.0


def test_picard_converges_in_ball(params, grid, shear_profile,
                                  wall_compatible_phi0, tmp_path):
    log = tmp_path / "picard.csv"
    out = solve_nonlinear(shear_profile, wall_compatible_phi0,
                          params=params, delta0=1e-4, log_path=log)
    assert out["converged"]
    assert out["in_ball"]
    assert out["iterations"] <= 4
    # quadratic nonlinearity with tiny data: the correction collapses fast
    assert out["state"].increments[-1] < 1e-9 * out["state"].increments[0]
    with open(log) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == out["iterations"]
    assert set(rows[0]) == {"m", "x_norm", "increment", "residual"}


def test_solution_scales_linearly_with_delta0(params, grid, shear_profile,
                                              wall_compatible_phi0):
    """In the perturbative regime the fixed point is governed by the
    linear part, so halving delta0 halves the solution norm."""
    a = solve_nonlinear(shear_profile, wall_compatible_phi0,
                        params=params, delta0=1e-4)
    b = solve_nonlinear(shear_profile, wall_compatible_phi0,
                        params=params, delta0=5e-5)
    assert b["x_norm"] / a["x_norm"] == pytest.approx(0.5, rel=1e-6)


def test_smallness_pattern_enforced(params, grid, shear_profile,
                                    wall_compatible_phi0):
    out = solve_nonlinear(shear_profile, wall_compatible_phi0,
                          params=params, delta0=1e-4)
    assert out["smallness"]["data_bracket"] == pytest.approx(
        1e-4 * params.nu ** 2.25, rel=1e-9)
    with pytest.raises(ValueError, match="smallness pattern"):
        solve_nonlinear(shear_profile, wall_compatible_phi0,
                        params=params, normalize=False)


def test_bilinear_constant_finite_both_orders(params, grid, shear_profile,
                                              wall_compatible_phi0):
    sol = solve_linearized(shear_profile, wall_compatible_phi0, params=params)
    single = np.zeros_like(wall_compatible_phi0)
    single[2] = wall_compatible_phi0[2]
    other = solve_linearized(shear_profile, single, params=params)
    c_ab = bilinear_ratio(sol.trajectory, other.trajectory, params)
    c_ba = bilinear_ratio(other.trajectory, sol.trajectory, params)
    for c in (c_ab, c_ba):
        assert c is not None
        assert math.isfinite(c) and c > 0.0
        assert c < 1.0


def test_bilinear_zero_cases(params, grid, shear_profile,
                             wall_compatible_phi0):
    sol = solve_linearized(shear_profile, wall_compatible_phi0, params=params)
    zero = solve_linearized(shear_profile,
                            np.zeros_like(wall_compatible_phi0),
                            params=params, check_profile=False)
    assert bilinear_ratio(zero.trajectory, zero.trajectory, params) == 0.0
    assert bilinear_ratio(sol.trajectory, zero.trajectory, params) == 0.0


def test_x_norm_positive_homogeneous(params, grid, wall_compatible_phi0):
    om = -(grid.diff_y(wall_compatible_phi0, 2)
           + grid.diff_x(wall_compatible_phi0, 2))
    base = x_norm(wall_compatible_phi0, om, params, grid)
    scaled = x_norm(2.5 * wall_compatible_phi0, 2.5 * om, params, grid)
    assert scaled == pytest.approx(2.5 * base, rel=1e-12)
    assert base > 0.0


def test_remainder_force_enters(params, grid, shear_profile,
                                wall_compatible_phi0):
    g = grid
    shape = (g.n_t + 1, g.n_x, g.n_y)
    env = (g.y_nodes ** 2 * np.exp(-g.y_nodes))[None, None, :]
    r = (np.ones(shape, complex) * env, np.zeros(shape, complex))
    with_r = solve_nonlinear(shear_profile, wall_compatible_phi0,
                             r=r, params=params, delta0=1e-4)
    without = solve_nonlinear(shear_profile, wall_compatible_phi0,
                              params=params, delta0=1e-4)
    assert with_r["smallness"]["remainder_l2"] == pytest.approx(
        1e-4 * params.nu ** 2.75, rel=1e-9)
    # the sup-in-time norm is pinned by the shared initial data, so compare
    # the trajectories themselves
    diff = np.max(np.abs(with_r["trajectory"].omega.data
                         - without["trajectory"].omega.data))
    scale = np.max(np.abs(without["trajectory"].omega.data))
    assert diff > 1e-3 * scale
    assert with_r["in_ball"]
