import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.linalg import solve as dense_solve

from gevreylab.airy import maximal_regularity_norms, solve_airy, weighted_theta_report
from gevreylab.grid import build_grid
from gevreylab.profiles import make_zero_profile


def _constant_source(grid, amp=1.0):
    y = grid.y_nodes
    H = np.zeros((grid.n_t + 1, grid.n_x, grid.n_y), complex)
    H[:, 1] = amp * (0.8 + 0.4j) * y ** 2 * np.exp(-y)
    H[:, grid.n_x - 1] = np.conj(H[:, 1])
    return H


def _dense_generator(grid, params, k):
    """Semi-discrete operator of mode k: nu^{1/2}(W^{-1} apply_m + a^2)."""
    eye = np.eye(grid.n_y)
    m_dense = np.column_stack(
        [grid.apply_m(eye[i][None])[0] for i in range(grid.n_y)])
    a2 = grid.alpha_values[k] ** 2
    L = -params.root_nu * (m_dense / grid.w_y[:, None] + a2 * eye)
    return L[1:-1, 1:-1]


def test_zero_source_gives_zero(params, grid, zero_profile):
    H = np.zeros((grid.n_t + 1, grid.n_x, grid.n_y), complex)
    traj = solve_airy(H, zero_profile, params)
    assert np.max(np.abs(traj.omega.data)) == 0.0
    assert np.max(np.abs(traj.phi.data)) == 0.0


def test_duhamel_matrix_exponential_oracle(params):
    """Constant-in-time source, V = 0: the semi-discrete solution is
    exactly L^{-1}(e^{LT} - I) H, and the march converges to it at
    second order in dt."""
    errs = []
    for n_t in (64, 128):
        g = build_grid(params, n_x=8, n_y=65, y_max=12.0,
                       dt=params.tau_end / n_t)
        prof = make_zero_profile(g)
        H = _constant_source(g)
        traj = solve_airy(H, prof, params)
        L = _dense_generator(g, params, 1)
        h_vec = H[0, 1, 1:-1]
        T = g.n_t * g.dt
        exact = dense_solve(L, (expm(L * T) - np.eye(L.shape[0])) @ h_vec)
        got = traj.omega.data[-1, 1, 1:-1]
        errs.append(np.max(np.abs(got - exact)) / np.max(np.abs(exact)))
    assert errs[0] < 1e-5
    order = math.log2(errs[0] / errs[1])
    assert order > 1.7


def test_walls_pinned_and_zero_start(params, grid, shear_profile):
    traj = solve_airy(_constant_source(grid), shear_profile, params)
    assert np.max(np.abs(traj.omega.data[0])) == 0.0
    assert np.max(np.abs(traj.omega.data[..., 0])) == 0.0
    assert np.max(np.abs(traj.omega.data[..., -1])) == 0.0
    assert traj.poisson_residual() < 1e-10


def test_source_shape_guard(params, grid, zero_profile):
    with pytest.raises(ValueError, match="source shape"):
        solve_airy(np.zeros((3, grid.n_x, grid.n_y)), zero_profile, params)


def test_theta_report_constants(params, grid, shear_profile):
    H = _constant_source(grid)
    traj = solve_airy(H, shear_profile, params)
    for theta in (0, 1, 2):
        rep = weighted_theta_report(traj, theta, params, shear_profile, H=H)
        assert rep["lhs"] > 0.0 and rep["rhs_source"] > 0.0
        assert math.isfinite(rep["constant_vs_source"])
        assert rep["constant_vs_source"] < 10.0
    with pytest.raises(ValueError, match="theta"):
        weighted_theta_report(traj, 3, params, shear_profile)
    rep0 = weighted_theta_report(traj, 0, params, shear_profile, H=H)
    rep_tr = weighted_theta_report(traj, 0, params, shear_profile,
                                   H=H, h_bc_norm=2.0)
    assert rep_tr["constant_vs_trace"] == pytest.approx(
        rep0["lhs"] * params.K ** 0.25 / 2.0, rel=1e-12)


def test_maximal_regularity_converges(params):
    vals = []
    for n_t in (32, 64):
        g = build_grid(params, n_x=8, n_y=65, y_max=12.0,
                       dt=params.tau_end / n_t)
        prof = make_zero_profile(g)
        traj = solve_airy(_constant_source(g), prof, params)
        rep = maximal_regularity_norms(traj, 1)
        assert math.isfinite(rep["dtau_l2"])
        assert math.isfinite(rep["laplacian_l2"])
        vals.append(rep["dtau_l2"])
    assert abs(vals[1] - vals[0]) < 0.05 * max(abs(vals[0]), 1e-30)
