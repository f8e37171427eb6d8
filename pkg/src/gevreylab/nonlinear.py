"""Small-data nonlinear solve by Picard iteration on the linearized system.

The nonlinearity is used in the rotational form w . grad w =
- w rot w - grad q~; the pressure part never appears in the vorticity
equation, so each iterate feeds F = w rot w + r to the linear no-slip
solver.  All bookkeeping is in the original-variables X norm

    |w|_X = |w|_inf + nu^{1/2} |rot w|_inf.

Rescaling note: with W(tau,X,Y) = w(t,x,y) the product W rot_XY W is
already the rescaled force of the rotational nonlinearity (the nu^{1/2}
force conversion cancels the nu^{-1/2} from rot), while a remainder r
given on the rescaled grid enters as nu^{1/2} r.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid
from .norms import gevrey_norm_orig, init_bracket
from .os_slip import equation_residual
from .params import Params
from .pipeline import LinearizedSolution, solve_linearized
from .profiles import BackgroundProfile

__all__ = ["PicardState", "x_norm", "bilinear_ratio", "solve_nonlinear"]


def x_norm(phi_data: np.ndarray, omega_data: np.ndarray, params: Params, grid: Grid) -> float:
    """Original-variables |w|_X from rescaled streamfunction/vorticity.

    Sup norms survive the rescaling unchanged and nu^{1/2}|rot w| equals
    |omega| on the rescaled fields.
    """
    w1 = grid.diff_y(phi_data)
    w2 = -grid.diff_x(phi_data)
    return math.hypot(
        gevrey_norm_orig(w1, math.inf, params, grid),
        gevrey_norm_orig(w2, math.inf, params, grid),
    ) + gevrey_norm_orig(omega_data, math.inf, params, grid)


def _velocity(phi: np.ndarray, grid: Grid):
    return grid.diff_y(phi), -grid.diff_x(phi)


def _rotational_force(phi: np.ndarray, omega: np.ndarray, grid: Grid):
    """(W1, W2) rot W as coefficient histories, product taken pointwise."""
    w1, w2 = _velocity(phi, grid)
    om_p = grid.to_physical(omega)
    f1 = grid.to_coefficients(grid.to_physical(w1) * om_p)
    f2 = grid.to_coefficients(grid.to_physical(w2) * om_p)
    return f1, f2


def bilinear_ratio(f, g, params: Params) -> float | None:
    """Measured constant of |f rot g|_2 <= (C/K^{1/2}) nu^{-3/4} |f|_X |g|_X.

    f and g are trajectories (rescaled fields); returns None when a
    denominator vanishes.
    """
    grid = f.grid
    xf = x_norm(f.phi.data, f.omega.data, params, grid)
    xg = x_norm(g.phi.data, g.omega.data, params, grid)
    if xf == 0.0 or xg == 0.0:
        fro = np.linalg.norm(f.omega.data) * np.linalg.norm(g.omega.data)
        return 0.0 if fro == 0.0 else None
    w1, w2 = _velocity(f.phi.data, grid)
    # rot g in original variables is nu^{-1/2} omega_g; fold the factor
    # into the measured-product norm
    rot_g = grid.to_physical(g.omega.data) / params.root_nu
    prod = math.hypot(
        gevrey_norm_orig(grid.to_coefficients(grid.to_physical(w1) * rot_g),
                         2, params, grid),
        gevrey_norm_orig(grid.to_coefficients(grid.to_physical(w2) * rot_g),
                         2, params, grid),
    )
    return prod * math.sqrt(params.K) * params.nu ** 0.75 / (xf * xg)


@dataclass
class PicardState:
    m: int
    x_norm: float
    radius: float
    increments: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    def in_ball(self) -> bool:
        return self.x_norm <= self.radius


def _smallness(phi0, r, params: Params, grid: Grid) -> dict:
    om0 = -(grid.diff_y(phi0, 2) + grid.diff_x(phi0, 2))
    w1, w2 = _velocity(phi0, grid)
    br = math.hypot(
        init_bracket(w1, params, grid, orig=True),
        init_bracket(w2, params, grid, orig=True),
    ) + init_bracket(om0, params, grid, orig=True) / params.root_nu
    r2 = 0.0
    if r is not None:
        # |r|_2 original = nu^{1/4} |nu^{1/2} R|_2 rescaled
        r2 = params.nu ** 0.75 * math.hypot(
            *(float(np.sqrt(grid.dt * np.sum(
                grid.x_length * (np.abs(np.asarray(c)) ** 2 @ grid.w_y))))
              for c in r))
    return {"data_bracket": br, "remainder_l2": r2}


def solve_nonlinear(
    profile: BackgroundProfile,
    phi0: np.ndarray,
    r=None,
    params: Params | None = None,
    delta0: float = 1e-4,
    tol: float = 1e-9,
    m_max: int = 8,
    normalize: bool = True,
    log_path: str | Path | None = None,
    check_profile: bool = True,
) -> dict:
    """Picard iteration w^{m+1} = LinearSolve(w0, F = w^m rot w^m + r).

    With normalize=True the inputs are scaled onto the smallness pattern
    [|w0|] + [|rot w0|] = delta0 nu^{9/4}, |r|_2 <= delta0 nu^{11/4}.
    Aborts when the increment grows on two consecutive iterations.
    """
    if params is None:
        raise ValueError("params is required")
    g = profile.grid
    phi0 = np.asarray(phi0, dtype=complex)
    small = _smallness(phi0, r, params, g)
    bound_w = delta0 * params.nu ** 2.25
    bound_r = delta0 * params.nu ** 2.75
    if normalize:
        if small["data_bracket"] > 0:
            phi0 = phi0 * (bound_w / small["data_bracket"])
        if r is not None and small["remainder_l2"] > 0:
            r = tuple(np.asarray(c, complex) * (bound_r / small["remainder_l2"])
                      for c in r)
        small = _smallness(phi0, r, params, g)
    elif small["data_bracket"] > bound_w * (1 + 1e-9) \
            or small["remainder_l2"] > bound_r * (1 + 1e-9):
        raise ValueError(f"data outside the smallness pattern: {small}")

    radius = 4.0 * delta0 * params.nu ** 1.75
    f_rem = None
    if r is not None:
        f_rem = tuple(params.root_nu * np.asarray(c, complex) for c in r)

    state = PicardState(m=0, x_norm=0.0, radius=radius)
    rows = []
    sol: LinearizedSolution | None = None
    phi_prev = None
    om_prev = None
    diverging = 0
    for m in range(m_max):
        if sol is None:
            F = f_rem
        else:
            f1, f2 = _rotational_force(sol.trajectory.phi.data,
                                       sol.trajectory.omega.data, g)
            if f_rem is not None:
                f1 = f1 + f_rem[0]
                f2 = f2 + f_rem[1]
            F = (f1, f2)
        sol = solve_linearized(profile, phi0, F=F, params=params,
                               check_profile=check_profile and m == 0)
        ph, om = sol.trajectory.phi.data, sol.trajectory.omega.data
        xn = x_norm(ph, om, params, g)
        if phi_prev is None:
            inc = xn
        else:
            inc = x_norm(ph - phi_prev, om - om_prev, params, g)
        resid = equation_residual(sol.slip, profile, params, F=F)
        state.m = m + 1
        state.x_norm = xn
        state.increments.append(inc)
        state.residuals.append(resid)
        rows.append({"m": m, "x_norm": xn, "increment": inc, "residual": resid})
        if len(state.increments) >= 2 and inc > state.increments[-2]:
            diverging += 1
            if diverging >= 2:
                _write_log(log_path, rows)
                raise RuntimeError(
                    f"Picard divergence: increments "
                    f"{state.increments[-3:]} growing; reduce delta0")
        else:
            diverging = 0
        phi_prev, om_prev = ph, om
        if inc < tol * max(1.0, xn) and m >= 1:
            break
    _write_log(log_path, rows)
    ratios = [b / a for a, b in zip(state.increments, state.increments[1:])
              if a > 0]
    return {
        "trajectory": sol.trajectory,
        "solution": sol,
        "state": state,
        "x_norm": state.x_norm,
        "radius": radius,
        "in_ball": state.in_ball(),
        "contraction_ratios": ratios,
        "iterations": state.m,
        "converged": bool(state.increments and
                          state.increments[-1] < tol * max(1.0, state.x_norm)),
        "smallness": small,
        "log_rows": rows,
        "delta0": delta0,
    }


def _write_log(log_path, rows) -> None:
    if log_path is None:
        return
    with open(log_path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["m", "x_norm", "increment", "residual"])
        wr.writeheader()
        for row in rows:
            wr.writerow(row)
