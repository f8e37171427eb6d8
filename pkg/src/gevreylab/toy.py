"""Reduced single-equation model: damped heat flow plus the stretching term.

    (K nu^{1/2}(j+1) + d_tau - nu^{1/2} Delta) omega + dX phi * dY_Omega = 0

with -Delta phi = omega, under either wall condition
  slip:   phi = omega = 0 at Y=0
  noslip: phi = dY phi = 0 at Y=0 (enforced by an influence correction)

The weighted energy identity behind the damping choice is verified term
by term in `weighted_energy_balance`, using the same flux-form operators
as the stepper so that spatial integration by parts is exact discretely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .grid import Grid, fornberg_weights
from .imex import DiffusionSolver
from .params import Params
from .weights import rho_j

__all__ = ["ToyState", "step_toy", "run_toy", "weighted_energy_balance"]


@dataclass
class ToyState:
    omega: np.ndarray          # (n_x, n_y) coefficients
    phi: np.ndarray
    bc_kind: str               # "slip" or "noslip"
    j: int
    grid: Grid


class _ToyStepper:
    def __init__(
        self,
        grid: Grid,
        params: Params,
        j: int,
        dy_omega: np.ndarray,
        bc_kind: str = "slip",
        viscous: bool = True,
        damped: bool = True,
    ):
        if bc_kind not in {"slip", "noslip"}:
            raise ValueError(f"unknown bc_kind {bc_kind!r}")
        self.grid = grid
        self.params = params
        self.j = j
        self.bc_kind = bc_kind
        s = params.root_nu if viscous else 0.0
        damp = params.K * params.root_nu * (j + 1) if damped else 0.0
        self.solver = DiffusionSolver(grid, s, damp)
        self.dy_omega = np.asarray(dy_omega, dtype=float)
        self.mu = 0.5 * grid.dt
        self._influence = None

    # weak application of (damp*C + s*(M + a^2 C)) per mode
    def _weak_op(self, omega: np.ndarray) -> np.ndarray:
        g = self.grid
        s, damp = self.solver.s, self.solver.damp
        out = damp * g.w_y * omega + s * g.apply_m(omega)
        a2 = (g.alpha_values ** 2)[:, None]
        out += s * a2 * g.w_y * omega
        return out

    def _stretch(self, phi: np.ndarray) -> np.ndarray:
        return self.grid.diff_x(phi) * self.dy_omega

    def _solve_phi(self, omega: np.ndarray) -> np.ndarray:
        phi = self.grid.solve_poisson(omega)
        if self.bc_kind == "noslip":
            phi, omega[...] = self._noslip_project(omega, phi)
        return phi

    def _wall_dy_row(self) -> np.ndarray:
        g = self.grid
        return fornberg_weights(g.y_nodes[0], g.y_nodes[:5], 1)

    def _noslip_influence(self):
        """Homogeneous wall-vorticity responses, cached per (mu, alpha)."""
        if self._influence is None:
            g = self.grid
            d0 = self._wall_dy_row()
            resp = []
            for k, a in enumerate(g.alpha_values):
                ab = self.solver._banded(self.mu, float(a) ** 2)
                rhs = np.zeros(g.n_y - 2)
                rhs[0] = -self.mu * self.solver.s * g.m_off[0]
                om_h = np.zeros(g.n_y)
                om_h[0] = 1.0
                om_h[1:-1] = solveh_banded(ab, rhs)
                phi_h = g.solve_poisson_mode(a, om_h.astype(complex))
                gh = float(np.dot(d0, phi_h[:5]).real)
                resp.append((om_h, phi_h, gh))
            self._influence = resp
        return self._influence

    def _noslip_project(self, omega, phi):
        g = self.grid
        d0 = self._wall_dy_row()
        resp = self._noslip_influence()
        om = omega.copy()
        ph = phi.copy()
        for k in range(g.n_x):
            om_h, phi_h, gh = resp[k]
            if abs(gh) < 1e-300:
                continue
            c = -complex(np.dot(d0, phi[k, :5])) / gh
            om[k] += c * om_h
            ph[k] += c * phi_h
        return ph, om

    def step(self, omega: np.ndarray, phi: np.ndarray):
        """One Crank-Nicolson step with one midpoint sweep on the coupling."""
        g = self.grid
        dt = g.dt
        base = g.w_y * omega - self.mu * self._weak_op(omega)

        phi_mid = phi
        new_omega = None
        for _ in range(2):
            bw = base - dt * g.w_y * self._stretch(phi_mid)
            new_omega = self.solver.solve_weighted(self.mu, bw)
            phi_new = g.solve_poisson(new_omega)
            phi_mid = 0.5 * (phi + phi_new)
        phi_new = self._solve_phi(new_omega)
        return new_omega, phi_new, phi_mid


def step_toy(state: ToyState, dt: float, dy_omega, params: Params) -> ToyState:
    """Advance the reduced model by one step of size dt (must equal grid.dt)."""
    g = state.grid
    if abs(dt - g.dt) > 1e-12 * g.dt:
        raise ValueError("step size must match the grid time step")
    stepper = _ToyStepper(g, params, state.j, dy_omega, state.bc_kind)
    om, ph, _ = stepper.step(state.omega, state.phi)
    return ToyState(om, ph, state.bc_kind, state.j, g)


def run_toy(
    omega0: np.ndarray,
    j: int,
    params: Params,
    grid: Grid,
    dy_omega,
    bc_kind: str = "slip",
    viscous: bool = True,
    damped: bool = True,
    n_steps: int | None = None,
) -> dict:
    """Run the reduced model; returns omega/phi histories and midpoint data."""
    stepper = _ToyStepper(grid, params, j, dy_omega, bc_kind, viscous, damped)
    n = grid.n_t if n_steps is None else n_steps
    omega = np.array(omega0, dtype=complex)
    omega[..., 0] = 0.0
    omega[..., -1] = 0.0
    phi = stepper._solve_phi(omega)
    om_hist = [omega.copy()]
    ph_hist = [phi.copy()]
    ph_mid = []
    for _ in range(n):
        omega, phi, pm = stepper.step(omega, phi)
        if not np.all(np.isfinite(omega)):
            raise FloatingPointError(f"non-finite vorticity at step {len(om_hist)}")
        om_hist.append(omega.copy())
        ph_hist.append(phi.copy())
        ph_mid.append(pm)
    return {
        "omega": np.array(om_hist),
        "phi": np.array(ph_hist),
        "phi_mid": np.array(ph_mid),
        "j": j,
        "bc_kind": bc_kind,
        "viscous": viscous,
        "damped": damped,
    }


def weighted_energy_balance(
    trajectory: dict,
    j: int,
    params: Params,
    grid: Grid,
    dy_omega,
) -> dict:
    """Term-by-term check of the damped weighted energy identity.

    With w = 1/(dY_Omega + 2 rho_j), the identity reads

      damp ||sqrt(w) omega||^2 + 1/2 d/dtau ||sqrt(w) omega||^2
          + nu^{1/2} ||sqrt(w) grad omega||^2
        = nu^{1/2} int w^2 grad(dY_Omega) . grad omega  omega
          + 2 nu^{1/2} int w^2 grad(rho_j) . grad omega  omega
          + int dX phi (2 rho_j w) omega
          -  int dX phi omega            (the cancellation term, == 0)

    All spatial integrals use the stepper's flux-form operators, so the
    only residual sources are time discretization and the midpoint sweep.
    """
    if trajectory["bc_kind"] != "slip":
        raise ValueError("the energy identity check requires the slip variant")
    g = grid
    om = trajectory["omega"]
    ph = trajectory["phi"]
    dyo = np.asarray(dy_omega, dtype=float)
    rj = rho_j(g.y_nodes, j, params)
    u = dyo + 2.0 * rj
    if np.any(u <= 0):
        raise ValueError("weight radicand must be positive")
    w = 1.0 / u
    s = params.root_nu if trajectory["viscous"] else 0.0
    damp = params.K * params.root_nu * (j + 1) if trajectory["damped"] else 0.0
    h = g.h_y
    c = g.w_y
    lx = g.x_length
    a = g.alpha_values[:, None]
    dt = g.dt

    def energy(f):
        return lx * float(np.sum(c * w * np.abs(f) ** 2))

    n_steps = om.shape[0] - 1
    terms = {k: np.zeros(n_steps) for k in (
        "damping", "ddtau", "gradient", "rhs_dyomega", "rhs_rho",
        "rhs_stretch", "defect")}
    for n in range(n_steps):
        om_m = 0.5 * (om[n] + om[n + 1])
        ph_m = 0.5 * (ph[n] + ph[n + 1])
        terms["ddtau"][n] = (energy(om[n + 1]) - energy(om[n])) / (2.0 * dt)
        terms["damping"][n] = damp * energy(om_m)

        d_om = np.diff(om_m, axis=-1)
        w_avg = 0.5 * (w[:-1] + w[1:])
        om_avg = 0.5 * (om_m[:, :-1] + om_m[:, 1:])
        grad = s * lx * (
            float(np.sum(w_avg * np.abs(d_om) ** 2 / h))
            + float(np.sum(a ** 2 * c * w * np.abs(om_m) ** 2))
        )
        terms["gradient"][n] = grad

        # Delta w = -w_k w_{k+1} Delta(dY_Omega + 2 rho): exact split
        ww = w[:-1] * w[1:]
        cross_core = np.real(np.conj(om_avg) * d_om) / h
        terms["rhs_dyomega"][n] = s * lx * float(
            np.sum(ww * np.diff(dyo) * cross_core.sum(axis=0)))
        terms["rhs_rho"][n] = s * lx * float(
            np.sum(ww * 2.0 * np.diff(rj) * cross_core.sum(axis=0)))

        dx_phi = 1j * a * ph_m
        terms["rhs_stretch"][n] = lx * float(
            np.sum(c * 2.0 * rj * w * np.real(dx_phi * np.conj(om_m))))
        terms["defect"][n] = lx * float(
            np.sum(c * np.real(dx_phi * np.conj(om_m))))

    integrals = {k: float(np.sum(v) * dt) for k, v in terms.items()}
    lhs = integrals["damping"] + integrals["ddtau"] + integrals["gradient"]
    rhs = integrals["rhs_dyomega"] + integrals["rhs_rho"] + integrals["rhs_stretch"] \
        - integrals["defect"]
    scale = max(abs(v) for v in integrals.values()) or 1.0
    # cancellation defect normalized against the factor sizes
    ph_mid_all = 0.5 * (ph[:-1] + ph[1:])
    om_mid_all = 0.5 * (om[:-1] + om[1:])
    dxp = 1j * g.alpha_values[None, :, None] * ph_mid_all
    n1 = np.sqrt(lx * np.sum(c * np.abs(dxp) ** 2))
    n2 = np.sqrt(lx * np.sum(c * np.abs(om_mid_all) ** 2))
    defect_rel = abs(np.sum(
        lx * c * np.real(dxp * np.conj(om_mid_all)))) / max(n1 * n2, 1e-300)

    return {
        "terms": integrals,
        "series": {k: v.tolist() for k, v in terms.items()},
        "lhs": lhs,
        "rhs": rhs,
        "residual": abs(lhs - rhs),
        "residual_relative": abs(lhs - rhs) / scale,
        "cancellation_defect_relative": float(defect_rel),
        "largest_term": scale,
    }
