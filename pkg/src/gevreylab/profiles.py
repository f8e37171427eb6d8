"""Background flows, builtin concave shear profiles, and the admissibility checker."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import hermite as H
from scipy.special import erf

from .fields import write_field_binary
from .grid import Grid
from .norms import log_weighted_sum
from .params import Params
from .weights import chi_nu, rho_floor

__all__ = [
    "BackgroundProfile",
    "make_shear_heat_profile",
    "make_zero_profile",
    "make_custom_profile",
    "check_assumptions",
    "save_profile",
]

TABLE_KEYS = (
    "V1", "V2", "dX_V1", "dX_V2", "dY_V1", "dY_V2",
    "Omega", "dX_Omega", "dY_Omega", "dY2_Omega", "dXY_Omega", "dtau_dY_Omega",
)


@dataclass(frozen=True, eq=False)
class BackgroundProfile:
    """Background flow V=(V1,V2) with vorticity Omega = dX V2 - dY V1.

    Tables are physical-space values broadcastable against
    (n_t+1, n_x, n_y); shear profiles keep a singleton X axis.
    dy_v1_order, when present, returns the analytic m-th Y derivative of
    V1 (used so high-order checks are free of differentiation noise).
    """

    grid: Grid
    name: str
    tables: dict
    is_shear: bool = False
    dy_v1_order: Callable[[int], np.ndarray] | None = None

    def __post_init__(self) -> None:
        missing = [k for k in TABLE_KEYS if k not in self.tables]
        if missing:
            raise ValueError(f"profile tables missing {missing}")

    @property
    def dy_omega(self) -> np.ndarray:
        return self.tables["dY_Omega"]

    def divergence_residual(self) -> float:
        """Relative size of dX V1 + dY V2 against the velocity scale."""
        g = self.grid
        div = self.tables["dX_V1"] + self.tables["dY_V2"]
        scale = max(np.max(np.abs(self.tables["dY_V1"])), 1e-30)
        return float(np.max(np.abs(div)) / scale)

    def boundary_velocity(self) -> float:
        v1 = np.max(np.abs(np.asarray(self.tables["V1"])[..., 0]))
        v2 = np.max(np.abs(np.asarray(self.tables["V2"])[..., 0]))
        return float(max(v1, v2))

    def omega_consistency(self) -> float:
        """Relative mismatch of the stored Omega against rot V recomputed."""
        g = self.grid
        if self.is_shear:
            v1 = np.broadcast_to(self.tables["V1"], (g.n_t + 1, 1, g.n_y))
            om = -g.diff_y(np.asarray(v1, dtype=float))
            ref = np.broadcast_to(self.tables["Omega"], om.shape)
        else:
            v1c = g.to_coefficients(self._full("V1"))
            v2c = g.to_coefficients(self._full("V2"))
            om = g.to_physical(g.diff_x(v2c)).real - g.diff_y(self._full("V1"))
            ref = self._full("Omega")
        scale = max(np.max(np.abs(ref)), 1e-30)
        return float(np.max(np.abs(om - ref)) / scale)

    def _full(self, key: str) -> np.ndarray:
        g = self.grid
        return np.broadcast_to(self.tables[key], (g.n_t + 1, g.n_x, g.n_y)).copy()


# ----------------------------------------------------------------------
# builtin profiles
# ----------------------------------------------------------------------
def _heat_layer_dy(m: int, s: np.ndarray, y: np.ndarray, u_inf: float) -> np.ndarray:
    """m-th Y derivative of u_inf*erf(Y/(2 sqrt(s))), m >= 1.

    Uses d^n/du^n e^{-u^2} = (-1)^n H_n(u) e^{-u^2} (physicists' Hermite).
    """
    u = y / (2.0 * np.sqrt(s))
    gauss = u_inf / np.sqrt(math.pi * s) * np.exp(-(u ** 2))
    if m == 1:
        return gauss
    coeff = np.zeros(m)
    coeff[m - 1] = 1.0
    herm = H.hermval(u, coeff)
    return gauss * (-1.0 / (2.0 * np.sqrt(s))) ** (m - 1) * herm * (-1.0) ** (m - 1)


def make_shear_heat_profile(
    params: Params,
    grid: Grid,
    tau_offset: float = 0.25,
    u_inf: float = 1.0,
) -> BackgroundProfile:
    """Self-similar heat shear layer V1 = u_inf erf(Y/(2 sqrt(tau+offset))).

    V1 solves the heat equation in (tau, Y), vanishes at the wall, and has
    d_Y Omega = -d_Y^2 V1 >= 0 everywhere with equality at Y=0 (the
    non-strict concavity case).  All derivative tables are analytic.
    """
    if tau_offset <= 0:
        raise ValueError("tau_offset must be positive")
    s = (grid.tau_nodes + tau_offset)[:, None, None]
    y = grid.y_nodes[None, None, :]
    u = y / (2.0 * np.sqrt(s))
    g1 = _heat_layer_dy(1, s, y, u_inf)

    v1 = u_inf * erf(u)
    d1 = g1
    d2 = -(y / (2.0 * s)) * g1
    d3 = (-1.0 / (2.0 * s) + y ** 2 / (4.0 * s ** 2)) * g1
    dtau_dyo = g1 * (-3.0 * y / (4.0 * s ** 2) + y ** 3 / (8.0 * s ** 3))

    zero = np.zeros_like(v1)
    tables = {
        "V1": v1, "V2": zero, "dX_V1": zero, "dX_V2": zero,
        "dY_V1": d1, "dY_V2": zero,
        "Omega": -d1, "dX_Omega": zero, "dY_Omega": -d2, "dY2_Omega": -d3,
        "dXY_Omega": zero, "dtau_dY_Omega": dtau_dyo,
    }
    return BackgroundProfile(
        grid=grid,
        name=f"shear-heat(u_inf={u_inf},offset={tau_offset})",
        tables=tables,
        is_shear=True,
        dy_v1_order=lambda m: _heat_layer_dy(m, s, y, u_inf),
    )


def make_zero_profile(grid: Grid) -> BackgroundProfile:
    zero = np.zeros((1, 1, grid.n_y))
    tables = {k: zero for k in TABLE_KEYS}
    return BackgroundProfile(grid=grid, name="zero", tables=tables, is_shear=True,
                             dy_v1_order=lambda m: zero)


def make_custom_profile(
    grid: Grid,
    *,
    psi: Callable | None = None,
    v1: Callable | None = None,
    name: str = "custom",
    tol: float = 1e-6,
) -> BackgroundProfile:
    """Build a profile from a streamfunction closure psi(tau, X, Y) or a
    shear closure v1(tau, Y); missing derivatives complete numerically.

    The streamfunction route makes the divergence vanish identically.
    """
    g = grid
    taus = g.tau_nodes
    if (psi is None) == (v1 is None):
        raise ValueError("pass exactly one of psi or v1")

    if v1 is not None:
        yv = v1(taus[:, None, None], g.y_nodes[None, None, :])
        yv = np.broadcast_to(yv, (g.n_t + 1, 1, g.n_y)).astype(float)
        if np.max(np.abs(yv[..., 0])) > tol * max(np.max(np.abs(yv)), 1e-30):
            raise ValueError("custom shear profile violates V1(Y=0)=0")
        d1 = g.diff_y(yv)
        d2 = g.diff_y(yv, 2)
        d3 = g.diff_y(yv, 3)
        zero = np.zeros_like(yv)
        dtau_dyo = -_time_derivative(d2, g.dt)
        tables = {
            "V1": yv, "V2": zero, "dX_V1": zero, "dX_V2": zero,
            "dY_V1": d1, "dY_V2": zero,
            "Omega": -d1, "dX_Omega": zero, "dY_Omega": -d2, "dY2_Omega": -d3,
            "dXY_Omega": zero, "dtau_dY_Omega": dtau_dyo,
        }
        return BackgroundProfile(grid=g, name=name, tables=tables, is_shear=True)

    tt, xx, yy = np.meshgrid(taus, g.x_nodes, g.y_nodes, indexing="ij")
    ps = np.asarray(psi(tt, xx, yy), dtype=float)
    psc = g.to_coefficients(ps)
    v1_ = g.diff_y(ps)
    v2c = -g.diff_x(psc)
    v2_ = g.to_physical(v2c).real
    scale = max(np.max(np.abs(v1_)), np.max(np.abs(v2_)), 1e-30)
    if max(np.max(np.abs(v1_[..., 0])), np.max(np.abs(v2_[..., 0]))) > tol * scale:
        raise ValueError("custom profile violates V(Y=0)=0")
    # pin the wall values so the Dirichlet condition holds exactly
    v1_[..., 0] = 0.0
    v2_[..., 0] = 0.0

    def dx(arr):
        return g.to_physical(g.diff_x(g.to_coefficients(arr))).real

    om = dx(v2_) - g.diff_y(v1_)
    dyo = g.diff_y(om)
    tables = {
        "V1": v1_, "V2": v2_, "dX_V1": dx(v1_), "dX_V2": dx(v2_),
        "dY_V1": g.diff_y(v1_), "dY_V2": g.diff_y(v2_),
        "Omega": om, "dX_Omega": dx(om), "dY_Omega": dyo,
        "dY2_Omega": g.diff_y(om, 2), "dXY_Omega": dx(dyo),
        "dtau_dY_Omega": _time_derivative(dyo, g.dt),
    }
    prof = BackgroundProfile(grid=g, name=name, tables=tables, is_shear=False)
    if prof.divergence_residual() > tol:
        raise ValueError(
            f"custom profile divergence {prof.divergence_residual():.2e} exceeds {tol}"
        )
    return prof


def _time_derivative(arr: np.ndarray, dt: float) -> np.ndarray:
    out = np.gradient(arr, dt, axis=0) if arr.shape[0] > 1 else np.zeros_like(arr)
    return out


# ----------------------------------------------------------------------
# assumption checker
# ----------------------------------------------------------------------
def check_assumptions(profile: BackgroundProfile, params: Params, tol: float = 1e-8) -> dict:
    """Machine check of the admissibility conditions (i)-(iv).

    Items (ii) and (iii) have unquantified constants; the report returns
    the minimal admissible values (truncated at j_cap / the Y-derivative
    cap, with the truncation recorded).  Item (iv) is a genuine pass/fail.
    """
    g = profile.grid
    y = g.y_nodes
    rnu = params.root_nu
    taus = g.tau_nodes

    # ---- item (i)
    div = profile.divergence_residual()
    bdry = profile.boundary_velocity()
    item_i = {
        "divergence": div,
        "boundary_velocity": bdry,
        "pass": bool(div <= tol and bdry <= tol),
    }

    # ---- helper: B_{j2} dX^{j-j2} of a table, in physical space
    chi = chi_nu(y, params)

    def b_dx(key: str, j: int, j2: int) -> np.ndarray:
        if profile.is_shear:
            if j != j2:
                return np.zeros((1, 1, 1))
            if key == "V1" and profile.dy_v1_order is not None:
                dy = profile.dy_v1_order(j2) if j2 else profile.tables["V1"]
            else:
                dy = g.diff_y(np.asarray(profile.tables[key], float), j2) \
                    if j2 else np.asarray(profile.tables[key], float)
            return chi ** j2 * dy
        arr = np.asarray(profile.tables[key], float)
        c = g.to_coefficients(np.broadcast_to(arr, (g.n_t + 1, g.n_x, g.n_y)).copy())
        c = g.diff_x(c, j - j2)
        out = g.to_physical(c).real
        if j2:
            out = chi ** j2 * g.diff_y(out, j2)
        return out

    damp = lambda j: np.exp(-params.K * rnu * j * taus)[:, None, None]
    w_ratio = (1.0 + y) / (1.0 + rnu * y)

    def sup(arr, j) -> float:
        a = np.asarray(arr)
        if a.size == 1 or a.shape[0] == 1:
            return float(np.max(np.abs(a)))
        return float(np.max(np.abs(a) * damp(j)))

    # ---- item (ii): the almost-Gevrey sum, truncated
    j2_max = params.j_y_cap
    per_j, logs = [], []
    v2_over_chi = _v2_over_chi(profile, params)
    for j in range(params.j_cap + 1):
        best = 0.0
        for j2 in range(min(j, j2_max) + 1):
            t1 = sup(b_dx("V1", j, j2), j)
            t3 = rnu ** -1 * math.sqrt(j + 1.0) * sup(b_dx("dX_V1", j, j2), j)
            t4 = math.sqrt(j + 1.0) * sup(b_dx("dY_V1", j, j2), j)
            t5 = rnu ** -1 * sup(w_ratio * b_dx("dX_Omega", j, j2), j)
            t6 = sup(w_ratio ** 2 * b_dx("dY_Omega", j, j2), j)
            best = max(best, t1 + t3 + t4 + t5 + t6)
        t2 = params.kappa * sup(_dxj_over_chi(v2_over_chi, g, j), j)
        per_j.append(best + t2)
        logs.append(-1.5 * math.lgamma(j + 1) - 0.5 * j * math.log(params.nu))
    c0_measured = log_weighted_sum(logs, per_j)
    item_ii = {
        "measured_c0": c0_measured,
        "declared_c0": params.c0_star,
        "within_declared": bool(c0_measured <= params.c0_star * (1 + 1e-9)),
        "truncation": {"j_cap": params.j_cap, "j_y_cap": j2_max},
        "pass": bool(math.isfinite(c0_measured)),
    }

    # ---- item (iii): the fixed-derivative weighted sups
    T = profile.tables
    vmag = np.sqrt(np.asarray(T["V1"], float) ** 2 + np.asarray(T["V2"], float) ** 2)
    terms3 = [
        np.max(vmag),
        rnu ** -1 * np.max(np.hypot(np.asarray(T["dX_V1"], float),
                                    np.asarray(T["dX_V2"], float))),
        np.max(np.abs(w_ratio * T["dY_V1"])),
        rnu ** -1 * np.max(np.abs(w_ratio * T["dX_Omega"])),
        np.max(np.abs(w_ratio ** 2 * T["dY_Omega"])),
        rnu ** -1 * np.max(np.abs((y / (1 + rnu * y)) ** 2 * T["dtau_dY_Omega"])),
        rnu ** -1 * np.max(np.abs(y * (1 + y) / (1 + rnu * y) ** 2 * T["dXY_Omega"])),
        np.max(np.abs(y * (1 + y) ** 2 / (1 + rnu * y) ** 3 * T["dY2_Omega"])),
    ]
    c1_measured = float(math.fsum(terms3))
    item_iii = {
        "measured_c1": c1_measured,
        "terms": [float(t) for t in terms3],
        "declared_c1": params.c1_star,
        "within_declared": bool(c1_measured <= params.c1_star * (1 + 1e-9)),
        "pass": bool(math.isfinite(c1_measured)),
    }

    # ---- item (iv): concavity margin and the weighted curvature ratios
    rho = rho_floor(y, params)
    margin_field = np.asarray(T["dY_Omega"], float) + rho
    margin = float(np.min(margin_field))
    idx = np.unravel_index(int(np.argmin(margin_field)), margin_field.shape)
    denom = np.sqrt(np.maximum(np.asarray(T["dY_Omega"], float) + 2.0 * rho, 1e-300))
    r1 = rnu ** -1 * np.max(np.abs(y / (1 + rnu * y) * T["dXY_Omega"] / denom))
    r2 = np.max(np.abs(y * (1 + y) / (1 + rnu * y) ** 2 * T["dY2_Omega"] / denom))
    c2_measured = float(r1 + r2)
    ok_iv = margin >= -tol and math.isfinite(c2_measured)
    item_iv = {
        "concavity_margin": margin,
        "worst_point": {"tau_index": int(idx[0]), "x_index": int(idx[1]),
                        "y": float(y[idx[2]]), "value": margin},
        "measured_c2": c2_measured,
        "declared_c2": params.c2_star,
        "within_declared": bool(c2_measured <= params.c2_star * (1 + 1e-9)),
        "pass": bool(ok_iv),
    }

    return {
        "profile": profile.name,
        "item_i": item_i,
        "item_ii": item_ii,
        "item_iii": item_iii,
        "item_iv": item_iv,
        "minimal_constants": {
            "c0_star": c0_measured, "c1_star": c1_measured, "c2_star": c2_measured,
        },
        "pass": bool(item_i["pass"] and item_ii["pass"] and item_iii["pass"]
                     and item_iv["pass"]),
    }


def _v2_over_chi(profile: BackgroundProfile, params: Params) -> np.ndarray:
    """V2 / chi evaluated away from the wall (limit handled separately)."""
    g = profile.grid
    chi = chi_nu(g.y_nodes, params)
    v2 = np.asarray(profile.tables["V2"], float)
    out = np.zeros(np.broadcast_shapes(v2.shape, (1, 1, g.n_y)))
    out[..., 1:] = v2[..., 1:] / chi[1:]
    dy_v2 = np.asarray(profile.tables["dY_V2"], float)
    out[..., 0] = dy_v2[..., 0] / (params.kappa * params.root_nu)
    return out


def _dxj_over_chi(v2_over_chi: np.ndarray, g: Grid, j: int) -> np.ndarray:
    """j-th X derivative of V2/chi (chi is X-independent so they commute)."""
    if j == 0:
        return v2_over_chi
    if v2_over_chi.shape[-2] == 1:
        return np.zeros((1, 1, 1))
    c = g.to_coefficients(np.ascontiguousarray(v2_over_chi))
    return g.to_physical(g.diff_x(c, j)).real


def save_profile(profile: BackgroundProfile, directory: str | Path) -> Path:
    """Serialize every table in the binary field format plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"name": profile.name, "is_shear": profile.is_shear, "tables": {}}
    for key in TABLE_KEYS:
        arr = np.asarray(profile.tables[key], dtype=complex)
        if arr.ndim == 2:
            arr = arr[None]
        fname = f"{key}.pglf"
        write_field_binary(directory / fname, arr)
        manifest["tables"][key] = fname
    (directory / "profile.json").write_text(json.dumps(manifest, indent=2))
    return directory / "profile.json"
