import math

import numpy as np
import pytest
from scipy.linalg import solve as dense_solve

from gevreylab.grid import build_grid
from gevreylab.os_slip import (
    equation_residual,
    solve_os_slip,
    source_norm_remark_check,
    wall_neumann_trace,
    weighted_apriori_report,
)
from gevreylab.profiles import make_shear_heat_profile, make_zero_profile


def _omega0_from(phi0, grid):
    om = -(grid.diff_y(phi0, 2) + grid.diff_x(phi0, 2))
    om[:, 0] = 0.0
    om[:, -1] = 0.0
    return om


def test_zero_profile_matches_dense_heat_stepper(params, grid, zero_profile,
                                                 wall_compatible_phi0):
    """With V = 0 every mode is plain Crank-Nicolson diffusion; a dense
    reimplementation of the weighted step must agree to rounding."""
    traj = solve_os_slip(zero_profile, wall_compatible_phi0, params=params)
    g = grid
    s = params.root_nu
    mu = 0.5 * g.dt
    eye = np.eye(g.n_y)
    m_dense = np.column_stack([g.apply_m(eye[k][None])[0] for k in range(g.n_y)])
    w = np.diag(g.w_y)
    omega = _omega0_from(wall_compatible_phi0, g)
    for k in (1, 2):
        a2 = g.alpha_values[k] ** 2
        op = s * (m_dense + a2 * w)
        lhs = w + mu * op
        rhs_m = w - mu * op
        u = omega[k].copy()
        for n in range(g.n_t):
            b = rhs_m @ u
            # interior solve with pinned walls
            u_new = np.zeros_like(u)
            u_new[1:-1] = dense_solve(lhs[1:-1, 1:-1], b[1:-1])
            u = u_new
        ref = traj.omega.data[-1, k]
        assert np.max(np.abs(u - ref)) < 1e-10 * max(np.max(np.abs(ref)), 1e-30)


def test_shear_modes_decouple(params, grid, shear_profile, wall_compatible_phi0):
    """Shear background: the multi-mode run restricted to one mode equals
    the run started from that mode alone."""
    full = solve_os_slip(shear_profile, wall_compatible_phi0, params=params)
    single = np.zeros_like(wall_compatible_phi0)
    single[1] = wall_compatible_phi0[1]
    alone = solve_os_slip(shear_profile, single, params=params)
    scale = np.max(np.abs(full.omega.data[:, 1]))
    diff = np.max(np.abs(full.omega.data[:, 1] - alone.omega.data[:, 1]))
    assert diff < 1e-10 * scale
    # and modes never started stay empty
    assert np.max(np.abs(alone.omega.data[:, 3])) == 0.0


def test_residual_second_order_in_time(params, shear_profile):
    resids = []
    for n_t in (48, 96, 192):
        g = build_grid(params, n_x=8, n_y=65, y_max=12.0,
                       dt=params.tau_end / n_t)
        prof = make_shear_heat_profile(params, g)
        y = g.y_nodes
        phi0 = np.zeros((g.n_x, g.n_y), complex)
        phi0[1] = (0.3 + 0.15j) * y ** 3 * np.exp(-y)
        phi0[g.n_x - 1] = np.conj(phi0[1])
        traj = solve_os_slip(prof, phi0, params=params)
        resids.append(equation_residual(traj, prof, params))
    order = math.log2(resids[0] / resids[1])
    assert order > 1.6
    assert resids[-1] < resids[0] / 8.0


def test_forcing_rot_equivalence(params, grid, shear_profile,
                                 wall_compatible_phi0):
    """Passing F through the curl equals passing G = dX F2 - dY F1."""
    g = grid
    y = g.y_nodes
    env = (y ** 3 * np.exp(-y))[None, None, :]
    taus = g.tau_nodes[:, None, None]
    f1 = np.zeros((g.n_t + 1, g.n_x, g.n_y), complex)
    f2 = np.zeros_like(f1)
    f1[:, 1] = 1e-3 * np.sin(math.pi * taus[:, :, 0] / taus[-1, 0, 0])
    f1 *= env
    f2[:, 2] = 1e-3 * env[0] * (taus[:, :, 0] / taus[-1, 0, 0])
    via_f = solve_os_slip(shear_profile, wall_compatible_phi0,
                          F=(f1, f2), params=params)
    G = g.diff_x(f2) - g.diff_y(f1)
    via_g = solve_os_slip(shear_profile, wall_compatible_phi0,
                          G=G, params=params)
    scale = np.max(np.abs(via_f.omega.data))
    assert np.max(np.abs(via_f.omega.data - via_g.omega.data)) < 1e-11 * scale


def test_residual_accounts_for_sources(params, grid, shear_profile,
                                       wall_compatible_phi0):
    g = grid
    y = g.y_nodes
    G = np.zeros((g.n_t + 1, g.n_x, g.n_y), complex)
    G[:, 1] = 1e-2 * y ** 3 * np.exp(-y)
    traj = solve_os_slip(shear_profile, wall_compatible_phi0, G=G, params=params)
    with_src = equation_residual(traj, shear_profile, params, G=G)
    without = equation_residual(traj, shear_profile, params)
    assert with_src < 1e-2
    assert with_src < without


def test_wall_neumann_trace_known_derivative(grid):
    y = grid.y_nodes
    phi = np.zeros((2, grid.n_x, grid.n_y), complex)
    phi[:, 1] = y * np.exp(-y)          # dY phi(0) = 1
    phi[:, 2] = np.sin(y)               # dY phi(0) = 1
    tr5 = wall_neumann_trace(phi, grid)
    tr7 = wall_neumann_trace(phi, grid, npts=7)
    for tr in (tr5, tr7):
        assert abs(tr[0, 1] - 1.0) < 1e-5
        assert abs(tr[0, 2] - 1.0) < 1e-5
    assert abs(tr7[0, 1] - 1.0) <= abs(tr5[0, 1] - 1.0) + 1e-12


def test_apriori_report_bounded(params, grid, shear_profile,
                                wall_compatible_phi0):
    traj = solve_os_slip(shear_profile, wall_compatible_phi0, params=params)
    rep = weighted_apriori_report(traj, params, shear_profile)
    assert not rep["vacuous"]
    assert rep["lhs"] > 0.0 and rep["rhs"] > 0.0
    assert math.isfinite(rep["ratio"])
    assert rep["ratio"] < 100.0


def test_source_norm_remark(params, grid):
    rng = np.random.default_rng(9)
    env = grid.y_nodes ** 2 * np.exp(-grid.y_nodes)
    shape = (grid.n_t + 1, grid.n_x, grid.n_y)
    F = ((rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * env,
         (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * env)
    rep = source_norm_remark_check(F, params, grid)
    assert rep["pass"], rep


def test_wall_data_rejected(params, grid, shear_profile):
    bad = np.ones((grid.n_x, grid.n_y), complex)
    with pytest.raises(ValueError, match="vanish at the wall"):
        solve_os_slip(shear_profile, bad, params=params)


def test_cfl_guard(params):
    p4 = params.with_(K=4.0)
    g = build_grid(p4, n_x=32, n_y=65, y_max=12.0, dt=0.5)
    prof = make_shear_heat_profile(p4, g)
    phi0 = np.zeros((g.n_x, g.n_y), complex)
    with pytest.raises(ValueError, match="stability limit"):
        solve_os_slip(prof, phi0, params=p4)
