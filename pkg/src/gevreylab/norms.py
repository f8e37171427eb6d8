"""Factorial-weighted norms over the time window (0, 1/(K nu^{1/2})].

All Gevrey sums accumulate (log-coefficient, value) pairs so that the
(j!)^{3/2} nu^{-j/2} factors never overflow, and final reductions use
compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .params import Params
from .weights import WeightFamily, chi_nu

__all__ = [
    "NormVariant",
    "seminorm_M",
    "gevrey_norm",
    "gevrey_norm_rescaled",
    "gevrey_norm_orig",
    "gevrey_norm_prime",
    "bc_norm",
    "init_bracket",
    "dual_h_minus1_norm",
    "log_weighted_sum",
]


def log_weighted_sum(log_coeffs, values) -> float:
    """sum_j exp(log_coeffs[j]) * values[j] for values >= 0, overflow-safe."""
    logs = []
    for lc, v in zip(log_coeffs, values):
        if v > 0.0:
            logs.append(lc + math.log(v))
    if not logs:
        return 0.0
    m = max(logs)
    return math.exp(m) * math.fsum(math.exp(x - m) for x in logs)


def _as_history(data: np.ndarray, grid: Grid) -> np.ndarray:
    data = np.asarray(data)
    if data.ndim == 2:
        data = data[None]
    if data.shape[-2:] != (grid.n_x, grid.n_y):
        raise ValueError(f"field shape {data.shape} does not match the grid")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite values in field")
    return data


def _lp_time(series: np.ndarray, p, dt: float) -> float:
    if p == math.inf or p == "inf":
        return float(np.max(series))
    ser = np.asarray(series, dtype=float) ** p
    return float(np.trapezoid(ser, dx=dt) ** (1.0 / p))


def _damping(params: Params, j: int, taus: np.ndarray) -> np.ndarray:
    return np.exp(-params.K * params.root_nu * (j + 1) * taus)


def _term_table(
    data: np.ndarray,
    p,
    params: Params,
    grid: Grid,
    weight_for_j,
    time_lp: bool = True,
) -> dict:
    """T[(j, j2)] = || damping * weight_j * B_{j2} dX^{j-j2} F ||_{Lp_tau L2}.

    weight_for_j(j) returns an array broadcastable against (n_t, n_x, n_y)
    (or None for weight 1).  With time_lp False the field is treated as a
    single time slice and the plain L2 norm is returned.
    """
    data = _as_history(data, grid)
    n_t = data.shape[0]
    taus = grid.tau_nodes[:n_t]
    wy = grid.w_y
    alpha_sq = grid.alpha_values ** 2
    chi = chi_nu(grid.y_nodes, params)
    j_cap, j2_cap = params.j_cap, params.j_y_cap

    table = {}
    cur = data
    for j2 in range(min(j_cap, j2_cap) + 1):
        b_sq = np.abs(chi ** j2 * cur) ** 2 if j2 else np.abs(cur) ** 2
        for j in range(j2, j_cap + 1):
            wt = weight_for_j(j)
            if wt is None:
                q = b_sq @ wy
            else:
                w2 = np.asarray(wt, dtype=float) ** 2 * wy
                if w2.ndim == 1:
                    q = b_sq @ w2
                else:
                    if w2.ndim == 3:
                        w2 = w2[:, 0, :]
                    if w2.shape[0] != n_t:
                        raise ValueError("weight history length mismatch")
                    q = np.einsum("tay,ty->ta", b_sq, w2)
            mode_fac = alpha_sq ** (j - j2)
            r = grid.x_length * (q * mode_fac).sum(axis=-1)
            norms = np.sqrt(np.maximum(r, 0.0))
            if time_lp:
                table[(j, j2)] = _lp_time(_damping(params, j, taus) * norms, p, grid.dt)
            else:
                table[(j, j2)] = float(norms[0])
        if j2 < min(j_cap, j2_cap):
            cur = grid.diff_y(cur)
    return table


def seminorm_M(
    data: np.ndarray,
    p,
    j: int,
    weight,
    params: Params,
    grid: Grid,
) -> dict:
    """M_{p,j,weight}[F]: sup over j2 <= min(j, J_y cap) of the damped norms.

    weight: None (unit), a Y array, or a (n_t, 1, n_y)-broadcastable array.
    Returns {"value", "argmax_j2", "clipped"}.
    """
    if j > params.m_int:
        raise ValueError(f"j={j} exceeds nu^(-1/2)={params.m_int}")
    table = _term_table(data, p, params.with_(j_cap=j), grid, lambda jj: weight)
    cands = {j2: v for (jj, j2), v in table.items() if jj == j}
    best = max(cands, key=cands.get)
    return {
        "value": cands[best],
        "argmax_j2": int(best),
        "clipped": bool(j > params.j_y_cap),
    }


def _log_coeff_rescaled(j: int, params: Params) -> float:
    return -1.5 * math.lgamma(j + 1) - 0.5 * j * math.log(params.nu)


def gevrey_norm_rescaled(data, p, params: Params, grid: Grid) -> float:
    """Norm of the rescaled variables: unit weight, sup over j2."""
    table = _term_table(data, p, params, grid, lambda j: None)
    vals = []
    for j in range(params.j_cap + 1):
        vals.append(max(table[(j, j2)] for j2 in range(min(j, params.j_y_cap) + 1)))
    logs = [_log_coeff_rescaled(j, params) for j in range(params.j_cap + 1)]
    return log_weighted_sum(logs, vals)


def gevrey_norm_orig(data, p, params: Params, grid: Grid) -> float:
    """Original-variables norm of a field stored in rescaled coordinates.

    Exact change of variables: the per-j terms coincide up to the measure
    factors nu^{1/2} (space) and nu^{1/(2p)} (time), and the nu^{-j/2}
    from d/dx = nu^{-1/2} d/dX cancels the rescaled coefficient.
    """
    fac = params.root_nu if p == math.inf else params.nu ** (0.5 + 0.5 / p)
    return fac * gevrey_norm_rescaled(data, p, params, grid)


def gevrey_norm_prime(
    data,
    p,
    params: Params,
    grid: Grid,
    family: WeightFamily | None = None,
    tilde_k: int = 0,
    unit_weight: bool = False,
) -> float:
    """Seminorm-based norm with xi (or unit) weights.

    |||F|||'_{p,xi} = sum_j nu^{1/(2p)} (j+1)^{1/p} / ((j!)^{3/2} nu^{j/2})
                      * M_{p,j,xi_j/(j+1)^{tilde_k/2}}[F].
    """
    if unit_weight:
        weight_for_j = lambda j: None
    else:
        if family is None:
            raise ValueError("xi-weighted norm needs a WeightFamily")
        weight_for_j = lambda j: family.xi_of(j, tilde_k)
    table = _term_table(data, p, params, grid, weight_for_j)
    vals, logs = [], []
    inv_p = 0.0 if p == math.inf else 1.0 / p
    for j in range(params.j_cap + 1):
        vals.append(max(table[(j, j2)] for j2 in range(min(j, params.j_y_cap) + 1)))
        logs.append(
            _log_coeff_rescaled(j, params)
            + inv_p * (0.5 * math.log(params.nu) + math.log(j + 1.0))
        )
    return log_weighted_sum(logs, vals)


def bc_norm(trace_values: np.ndarray, params: Params, grid: Grid) -> float:
    """Boundary-trace norm: sum_j nu^{1/4}(j+1)^{1/2} factorial-weighted
    L2_tau L2_X norms of the damped j-th X derivative."""
    h = np.asarray(trace_values, dtype=complex)
    if h.ndim != 2 or h.shape[1] != grid.n_x:
        raise ValueError("trace must have shape (n_times, n_x)")
    taus = grid.tau_nodes[: h.shape[0]]
    alpha_sq = grid.alpha_values ** 2
    dens = np.abs(h) ** 2
    vals, logs = [], []
    for j in range(params.j_cap + 1):
        r = grid.x_length * (dens * alpha_sq ** j).sum(axis=-1)
        series = _damping(params, j, taus) * np.sqrt(r)
        vals.append(_lp_time(series, 2, grid.dt))
        logs.append(
            _log_coeff_rescaled(j, params)
            + 0.25 * math.log(params.nu)
            + 0.5 * math.log(j + 1.0)
        )
    return log_weighted_sum(logs, vals)


def init_bracket(data: np.ndarray, params: Params, grid: Grid, orig: bool = False) -> float:
    """Initial-data bracket [||W0||] (rescaled) or [|w0|] = nu^{1/2}[||W0||]."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("initial bracket takes a single time slice")
    table = _term_table(data[None], math.inf, params, grid, lambda j: None, time_lp=False)
    vals = []
    for j in range(params.j_cap + 1):
        vals.append(max(table[(j, j2)] for j2 in range(min(j, params.j_y_cap) + 1)))
    logs = [_log_coeff_rescaled(j, params) for j in range(params.j_cap + 1)]
    out = log_weighted_sum(logs, vals)
    return params.root_nu * out if orig else out


def dual_h_minus1_norm(g_coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """|| G ||_{H^-1} per time slice via the Riesz representative.

    Solves -Delta u = G with u(Y=0)=0 and returns ||grad u||_2; computed
    through the exact discrete identity ||grad u||^2 = <G, u>.
    """
    g = np.asarray(g_coeffs, dtype=complex)
    single = g.ndim == 2
    if single:
        g = g[None]
    u = grid.solve_poisson(g)
    inner = np.einsum("tay,tay,y->t", np.conj(u), g, grid.w_y).real
    out = np.sqrt(np.maximum(grid.x_length * inner, 0.0))
    return out[0] if single else out


@dataclass(frozen=True)
class NormVariant:
    """Named norm selector: tag in {orig, rescaled, prime, bc, init_bracket}."""

    tag: str
    p: float = 2
    weight: str = "xi"   # for prime: "xi", "unit", "xi_tilde1", "xi_tilde2"

    def __post_init__(self) -> None:
        if self.tag not in {"orig", "rescaled", "prime", "bc", "init_bracket"}:
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.tag == "prime" and self.weight not in {
            "xi", "unit", "xi_tilde1", "xi_tilde2",
        }:
            raise ValueError(f"invalid prime-norm weight {self.weight!r}")


def gevrey_norm(
    data,
    variant: NormVariant,
    params: Params,
    grid: Grid,
    family: WeightFamily | None = None,
) -> float:
    """Dispatch on the variant tag; see the individual norm functions."""
    if variant.tag == "rescaled":
        return gevrey_norm_rescaled(data, variant.p, params, grid)
    if variant.tag == "orig":
        return gevrey_norm_orig(data, variant.p, params, grid)
    if variant.tag == "bc":
        return bc_norm(data, params, grid)
    if variant.tag == "init_bracket":
        return init_bracket(data, params, grid)
    if variant.weight == "unit":
        return gevrey_norm_prime(data, variant.p, params, grid, unit_weight=True)
    k = {"xi": 0, "xi_tilde1": 1, "xi_tilde2": 2}[variant.weight]
    return gevrey_norm_prime(data, variant.p, params, grid, family=family, tilde_k=k)
