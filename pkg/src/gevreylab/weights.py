"""Per-order weights chi, rho_j, xi_j and the B_{j2} derivative operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .params import Params

__all__ = [
    "chi_nu",
    "rho_j",
    "drho_j_dy",
    "rho_floor",
    "xi_j",
    "apply_B",
    "WeightFamily",
    "check_weight_lemma",
]


def chi_nu(y, params: Params) -> np.ndarray:
    """Cutoff chi(Y) = 1 - exp(-kappa nu^{1/2} Y); vanishes at the wall."""
    return -np.expm1(-params.kappa * params.root_nu * np.asarray(y, dtype=float))


def rho_j(y, j: int, params: Params) -> np.ndarray:
    """Order-j weight floor.

    K^{1/4} C_* (1+(j+1)^{1/2} Y)^{-2}
      + C_* [ (1+Y/nu^{1/4})^{-2} + nu^{1/2} (1+Y)^{-2} + nu ].
    """
    y = np.asarray(y, dtype=float)
    lam = np.sqrt(j + 1.0)
    c, k4 = params.c_star, params.K ** 0.25
    return (
        k4 * c / (1.0 + lam * y) ** 2
        + c / (1.0 + y / params.nu ** 0.25) ** 2
        + c * params.root_nu / (1.0 + y) ** 2
        + c * params.nu
    )


def drho_j_dy(y, j: int, params: Params) -> np.ndarray:
    """Analytic d rho_j / dY (each term is an explicit power)."""
    y = np.asarray(y, dtype=float)
    lam = np.sqrt(j + 1.0)
    c, k4 = params.c_star, params.K ** 0.25
    q = params.nu ** 0.25
    return (
        -2.0 * lam * k4 * c / (1.0 + lam * y) ** 3
        - 2.0 * c / q / (1.0 + y / q) ** 3
        - 2.0 * c * params.root_nu / (1.0 + y) ** 3
    )


def rho_floor(y, params: Params) -> np.ndarray:
    """The j-independent floor rho of the concavity condition d_Y Omega + rho >= 0."""
    y = np.asarray(y, dtype=float)
    c = params.c_star
    return (
        c / (1.0 + y / params.nu ** 0.25) ** 2
        + c * params.root_nu / (1.0 + y) ** 2
        + c * params.nu
    )


def xi_j(dy_omega, j: int, params: Params, y=None, grid: Grid | None = None):
    """xi_j = 1/sqrt(d_Y Omega + 2 rho_j) on the nodes carried by dy_omega.

    dy_omega may be any array whose last axis runs over Y; y defaults to
    the grid nodes.
    """
    if y is None:
        if grid is None:
            raise ValueError("pass y explicitly or provide a grid")
        y = grid.y_nodes
    rad = np.asarray(dy_omega, dtype=float) + 2.0 * rho_j(y, j, params)
    if np.any(rad <= 0.0):
        k = np.unravel_index(int(np.argmin(rad)), rad.shape)
        raise ValueError(
            f"nonpositive radicand d_Y Omega + 2 rho_j = {rad[k]:.3e} "
            f"at index {k} (j={j}); profile fails the concavity margin"
        )
    return 1.0 / np.sqrt(rad)


def apply_B(values: np.ndarray, j2: int, params: Params, grid: Grid) -> np.ndarray:
    """B_{j2} f = chi^{j2} d^{j2}f/dY^{j2} along the last axis."""
    if j2 > params.j_y_cap:
        raise ValueError(f"j2={j2} exceeds the vertical-derivative cap {params.j_y_cap}")
    if j2 == 0:
        return np.asarray(values).copy()
    return chi_nu(grid.y_nodes, params) ** j2 * grid.diff_y(values, j2)


@dataclass(frozen=True)
class WeightFamily:
    """All weights evaluated on one grid, for j = 0..j_cap.

    xi is None when no profile was attached (then 1/sqrt(2 rho_j) applies).
    """

    params: Params
    chi: np.ndarray
    rho: np.ndarray           # (j_cap+1, n_y)
    xi: np.ndarray | None     # (j_cap+1, ...) broadcastable against histories

    @classmethod
    def build(cls, params: Params, grid: Grid, dy_omega=None) -> "WeightFamily":
        y = grid.y_nodes
        rho = np.stack([rho_j(y, j, params) for j in range(params.j_cap + 1)])
        xi = None
        if dy_omega is not None:
            xi = np.stack(
                [xi_j(dy_omega, j, params, y=y) for j in range(params.j_cap + 1)]
            )
        return cls(params, chi_nu(y, params), rho, xi)

    def xi_of(self, j: int, tilde_k: int = 0) -> np.ndarray:
        """xi_j, or the damped variant xi_j/(j+1)^{k/2} used in source norms."""
        if self.xi is None:
            base = 1.0 / np.sqrt(2.0 * self.rho[j])
        else:
            base = self.xi[j]
        return base / (j + 1.0) ** (tilde_k / 2.0)


# ----------------------------------------------------------------------
# Weight-lemma checker
# ----------------------------------------------------------------------
def _check(name, lhs, rhs, where, tol=1e-12):
    lhs = float(lhs)
    rhs = float(rhs)
    return {
        "name": name,
        "lhs": lhs,
        "rhs": rhs,
        "pass": bool(lhs <= rhs * (1.0 + tol) + tol),
        "location": where,
    }


def check_weight_lemma(
    params: Params,
    grid: Grid,
    dy_omega=None,
    j_list=None,
) -> dict:
    """Pointwise verification of the weight-family inequality suite.

    Checks, for every j in j_list and every node Y:
      (a) xi_j^2 <= 1/rho_j and the floor 1/rho_j <= 1/(C_* max(...))
      (b) 1/rho_j <= 4/(K^{1/4} C_*) on 0 <= Y <= (j+1)^{-1/2}
      (c) the (1+nu^{1/2}Y)-weighted sup bounds on xi_j  (measured constant)
      (d) ||rho_j||_inf <= 4 K^{1/4} C_*  and  ||Y rho_j'/rho_j||_inf <= 2
      (e) ||1/xi_j||_inf <= (C_1^* + 8 K^{1/4} C_*)^{1/2}
      (f) sup_j ||xi_j / xi_{j-1}||_inf  (measured constant)
    Items with an unquantified universal constant report the measured value.
    """
    y = grid.y_nodes
    if j_list is None:
        j_list = sorted({0, 1, 3, 7, min(15, params.j_cap), params.j_cap})
    checks = []
    measured = {}
    c, k4, nu = params.c_star, params.K ** 0.25, params.nu
    dyo = np.zeros_like(y) if dy_omega is None else np.asarray(dy_omega, dtype=float)
    # collapse any leading (tau, X) axes for pointwise sups
    dyo_flat = dyo.reshape(-1, dyo.shape[-1]) if dyo.ndim > 1 else dyo[None]

    ratio_sup = 0.0
    for j in j_list:
        rj = rho_j(y, j, params)
        xj = np.concatenate([xi_j(row, j, params, y=y)[None] for row in dyo_flat])
        lam = np.sqrt(j + 1.0)

        # (a) xi^2 <= 1/rho_j wherever d_Y Omega >= -rho_j; the floor bound
        bad = np.max(xj ** 2 * rj)
        checks.append(_check(f"xi_le_inv_rho[j={j}]", bad, 1.0, "grid sweep"))
        floor = c * np.maximum(k4 / (1.0 + lam * y) ** 2, nu)
        worst = np.max(floor / rj)
        checks.append(_check(f"inv_rho_floor[j={j}]", worst, 1.0, "grid sweep"))

        # (b) near-wall bound
        mask = y <= 1.0 / lam
        lhs = np.max(1.0 / rj[mask])
        checks.append(
            _check(f"inv_rho_nearwall[j={j}]", lhs, 4.0 / (k4 * c), "Y <= (j+1)^-1/2")
        )

        # (c) measured constant of the weighted xi sups
        w1 = np.max((1.0 + params.root_nu * y) / (1.0 + y) * xj)
        tail = y >= 1.0 / lam
        w2 = np.max((1.0 + params.root_nu * y[tail]) / y[tail] * xj[..., tail])
        measured[f"xi_weighted_sup_over_sqrt_j[j={j}]"] = float((w1 + w2) / lam)

        # (d) rho bounds
        checks.append(_check(f"rho_sup[j={j}]", np.max(rj), 4.0 * k4 * c, "grid sweep"))
        logder = np.abs(y * drho_j_dy(y, j, params) / rj)
        checks.append(_check(f"rho_logderiv[j={j}]", np.max(logder), 2.0, "grid sweep"))

        # (e) 1/xi bound (uses the declared C_1^* as the d_Y Omega budget)
        lhs = np.max(1.0 / xj)
        rhs = np.sqrt(params.c1_star + 8.0 * k4 * c)
        ok = np.max(dyo) <= params.c1_star + 1e-12
        checks.append(
            _check(
                f"inv_xi_sup[j={j}]",
                lhs,
                rhs if ok else lhs,
                "grid sweep" if ok else "d_Y Omega exceeds declared C_1^*",
            )
        )

        if j >= 1:
            xjm1 = np.concatenate(
                [xi_j(row, j - 1, params, y=y)[None] for row in dyo_flat]
            )
            ratio_sup = max(ratio_sup, float(np.max(xj / xjm1)))

    measured["xi_ratio_consecutive_sup"] = ratio_sup
    return {
        "checks": checks,
        "measured_constants": measured,
        "all_pass": all(ch["pass"] for ch in checks),
        "j_list": list(map(int, j_list)),
    }
