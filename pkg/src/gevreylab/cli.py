"""Batch experiment runner.

Usage:
    gevreylab run <config.toml>
    gevreylab run --experiment <name> [--set key=value ...]
    gevreylab list-experiments
    gevreylab validate <config.toml>

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
Artifacts go to $GEVREYLAB_ARTIFACTS (default ./artifacts), one
timestamped directory per run, with a manifest naming every output and
the fully resolved configuration.  Identical config and seed give
byte-identical reports.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .airy import solve_airy, weighted_theta_report
from .grid import build_grid
from .nonlinear import bilinear_ratio, solve_nonlinear
from .norms import bc_norm
from .os_slip import equation_residual
from .params import Params
from .pipeline import (
    build_correction,
    contraction_factor,
    random_band_limited_trace,
    solve_linearized,
    theorem_scaling_ratio,
)
from .profiles import (
    check_assumptions,
    make_shear_heat_profile,
    make_zero_profile,
)
from .stokes import multiplier_bound_report, solve_stokes_corrector
from .toy import run_toy, weighted_energy_balance
from .weights import check_weight_lemma

EXPERIMENTS = (
    "weight-lemma",
    "toy-energy",
    "stokes-multipliers",
    "airy-bounds",
    "contraction-sweep",
    "linear-solve",
    "theorem-scaling",
    "nonlinear-picard",
    "assumption-check",
)


class ConfigError(Exception):
    pass


DEFAULTS = {
    "experiment": "",
    "seed": 0,
    "profile": "shear-heat",
    "params": {"nu": 0.0625, "K": 64.0, "kappa": 0.05, "c_star": 1.0},
    "grid": {"n_x": 8, "n_y": 65, "y_max": 12.0, "n_t": 48},
    "opts": {},
}

OPT_DEFAULTS = {
    "weight-lemma": {"nu_list": [1.0, 0.25, 0.0625], "K_list": [1.0, 4.0, 16.0],
                     "j_list": [0, 1, 3, 7, 15]},
    "toy-energy": {"j": 1, "n_t_list": [24, 48, 96], "mode": 1},
    "stokes-multipliers": {"j_list": [0, 15], "K_list": [1.0, 16.0]},
    "airy-bounds": {"K_list": [4.0, 16.0, 64.0], "theta_list": [0, 1, 2]},
    "contraction-sweep": {"K_list": [4.0, 16.0, 64.0, 256.0], "n_samples": 3,
                          "band": 3},
    "linear-solve": {"amplitude": 0.3, "export_fields": False, "tol": 1e-8},
    "theorem-scaling": {"nu_list": [0.25, 0.0625, 0.015625], "amplitude": 0.3},
    "nonlinear-picard": {"delta0": 1e-4, "m_max": 8, "tol": 1e-9,
                         "bilinear_K_list": [4.0, 16.0, 64.0]},
    "assumption-check": {},
}


# ----------------------------------------------------------------------
# configuration plumbing
# ----------------------------------------------------------------------
def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{path}: no such config file")
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    cfg = _merge(DEFAULTS, raw)
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {name!r}; choose one of {', '.join(EXPERIMENTS)}")
    cfg["opts"] = _merge(OPT_DEFAULTS[name], cfg.get("opts", {}))
    if cfg["profile"] not in {"shear-heat", "zero"}:
        raise ConfigError(f"unknown profile {cfg['profile']!r}")
    try:
        _params_from(cfg)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid [params]: {e}") from e
    g = cfg["grid"]
    for key in ("n_x", "n_y", "n_t"):
        if not isinstance(g.get(key), int) or g[key] < 4:
            raise ConfigError(f"invalid [grid].{key}: need an integer >= 4")
    return cfg


def _set_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set needs key=value, got {assignment!r}")
    key, _, val = assignment.partition("=")
    try:
        value = json.loads(val)
    except json.JSONDecodeError:
        value = val
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set path {key!r} crosses a scalar")
    node[parts[-1]] = value


def _params_from(cfg: dict, **over) -> Params:
    kw = dict(cfg["params"])
    kw.update(over)
    return Params(**kw)


def _grid_from(cfg: dict, params: Params, **over):
    g = dict(cfg["grid"])
    g.update(over)
    n_t = g.pop("n_t")
    return build_grid(params, n_x=g["n_x"], n_y=g["n_y"], y_max=g["y_max"],
                      dt=params.tau_end / n_t)


def _profile_from(cfg: dict, params: Params, grid):
    if cfg["profile"] == "zero":
        return make_zero_profile(grid)
    return make_shear_heat_profile(params, grid)


def _phi0(grid, amplitude: float) -> np.ndarray:
    """Wall-compatible smooth data on the lowest conjugate mode pair."""
    y = grid.y_nodes
    base = amplitude * y ** 3 * np.exp(-y)
    phi0 = np.zeros((grid.n_x, grid.n_y), complex)
    phi0[1] = base * (1.0 + 0.5j)
    phi0[grid.n_x - 1] = np.conj(phi0[1])
    return phi0


# ----------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------
def _exp_weight_lemma(cfg, outdir):
    opts = cfg["opts"]
    rows = []
    all_pass = True
    for nu in opts["nu_list"]:
        for K in opts["K_list"]:
            p = _params_from(cfg, nu=nu, K=K)
            g = _grid_from(cfg, p)
            prof = _profile_from(cfg, p, g)
            dyo = np.asarray(prof.tables["dY_Omega"])[0, 0]
            j_list = sorted({min(j, p.j_cap) for j in opts["j_list"]})
            rep = check_weight_lemma(p, g, dy_omega=dyo, j_list=j_list)
            for chk in rep["checks"]:
                rows.append({"nu": nu, "K": K, "name": chk["name"],
                             "lhs": chk["lhs"], "rhs": chk["rhs"],
                             "pass": chk["pass"]})
                all_pass = all_pass and chk["pass"]
    return {"rows": rows, "all_pass": all_pass}


def _exp_toy_energy(cfg, outdir):
    opts = cfg["opts"]
    p = _params_from(cfg)
    rows = []
    for n_t in opts["n_t_list"]:
        g = _grid_from(cfg, p, n_t=n_t)
        prof = _profile_from(cfg, p, g)
        dyo = np.asarray(prof.tables["dY_Omega"])[0, 0]
        y = g.y_nodes
        om0 = np.zeros((g.n_x, g.n_y), complex)
        om0[opts["mode"]] = y ** 2 * np.exp(-y)
        traj = run_toy(om0, opts["j"], p, g, dyo)
        bal = weighted_energy_balance(traj, opts["j"], p, g, dyo)
        rows.append({"dt": g.dt, "residual_relative": bal["residual_relative"],
                     "cancellation_defect": bal["cancellation_defect_relative"]})
    orders = [
        math.log2(a["residual_relative"] / b["residual_relative"])
        for a, b in zip(rows, rows[1:])
        if b["residual_relative"] > 0
    ]
    return {"rows": rows, "orders": orders}


def _exp_stokes_multipliers(cfg, outdir):
    opts = cfg["opts"]
    rows = []
    for K in opts["K_list"]:
        p = _params_from(cfg, K=K)
        rep = multiplier_bound_report(p, j_list=tuple(opts["j_list"]))
        for r in rep["rows"]:
            for kind, val in r["constants"].items():
                arg = r["argmax"][kind] or {"alpha": math.nan, "lambda": math.nan}
                rows.append({"j": r["j"], "K": K, "alpha": arg["alpha"],
                             "lambda": arg["lambda"],
                             "measured_constant": val, "kind": kind})
    return {"rows": rows}


def _exp_airy_bounds(cfg, outdir):
    opts = cfg["opts"]
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for K in opts["K_list"]:
        p = _params_from(cfg, K=K)
        g = _grid_from(cfg, p)
        prof = _profile_from(cfg, p, g)
        h = random_band_limited_trace(g, p, rng)
        stage1 = solve_stokes_corrector(h, 0, p)
        H = -_advect(stage1.omega.data, prof, g)
        traj = solve_airy(H, prof, p)
        h_norm = bc_norm(h.values, p, g)
        for theta in opts["theta_list"]:
            rep = weighted_theta_report(traj, theta, p, prof, h_bc_norm=h_norm)
            rows.append({"theta": theta, "K": K, "lhs": rep["lhs"],
                         "constant": rep.get("constant_vs_trace", math.nan),
                         "ratio_vs_trace": rep["lhs"] / h_norm})
    return {"rows": rows}


def _advect(omega, profile, g):
    ox = g.to_physical(g.diff_x(omega))
    oy = g.to_physical(g.diff_y(omega))
    out = g.to_coefficients(np.asarray(profile.tables["V1"]) * ox
                            + np.asarray(profile.tables["V2"]) * oy)
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return out


def _exp_contraction_sweep(cfg, outdir):
    opts = cfg["opts"]
    rows = []
    for K in opts["K_list"]:
        p = _params_from(cfg, K=K)
        g = _grid_from(cfg, p)
        prof = _profile_from(cfg, p, g)
        q = contraction_factor(prof, p, n_samples=opts["n_samples"],
                               seed=cfg["seed"], band=opts["band"])
        rows.append({"K": K, "q": q})
    qs = [r["q"] for r in rows]
    return {"rows": rows,
            "non_increasing": bool(all(b <= a * (1 + 1e-9)
                                       for a, b in zip(qs, qs[1:]))),
            "below_half": bool(any(q < 0.5 for q in qs))}


def _exp_linear_solve(cfg, outdir):
    opts = cfg["opts"]
    p = _params_from(cfg)
    g = _grid_from(cfg, p)
    prof = _profile_from(cfg, p, g)
    phi0 = _phi0(g, opts["amplitude"])
    sol = solve_linearized(prof, phi0, params=p, tol=opts["tol"],
                           check_profile=cfg["profile"] != "zero")
    resid = equation_residual(sol.slip, prof, p)
    files = {}
    if opts["export_fields"]:
        from .fields import write_field_binary
        for name, arr in (("omega.pglf", sol.trajectory.omega.data),
                          ("phi.pglf", sol.trajectory.phi.data)):
            write_field_binary(outdir / name, arr)
            files[name] = name
    inv = sol.inversion
    return {
        "boundary_velocity_max": sol.boundary_velocity_max,
        "boundary_velocity_fd": sol.reports["boundary_velocity_fd"],
        "slip_residual": resid,
        "series_terms": inv.n_terms if inv else 0,
        "measured_q": inv.q_history if inv else [],
        "series_residual": inv.residual_bc if inv else None,
        "files": files,
    }


def _exp_theorem_scaling(cfg, outdir):
    opts = cfg["opts"]
    rows = []
    for nu in opts["nu_list"]:
        p = _params_from(cfg, nu=nu)
        g = _grid_from(cfg, p)
        prof = _profile_from(cfg, p, g)
        phi0 = _phi0(g, opts["amplitude"])
        sol = solve_linearized(prof, phi0, params=p,
                               check_profile=cfg["profile"] != "zero")
        rep = theorem_scaling_ratio(sol, phi0, None, p)
        rows.append({"nu": nu, "ratio": rep["ratio"],
                     "numerator": rep["numerator"],
                     "denominator": rep["denominator"]})
    return {"rows": rows,
            "max_ratio": max((r["ratio"] for r in rows), default=0.0)}


def _exp_nonlinear_picard(cfg, outdir):
    opts = cfg["opts"]
    p = _params_from(cfg)
    g = _grid_from(cfg, p)
    prof = _profile_from(cfg, p, g)
    phi0 = _phi0(g, 1.0)
    out = solve_nonlinear(prof, phi0, None, params=p, delta0=opts["delta0"],
                          tol=opts["tol"], m_max=opts["m_max"],
                          log_path=outdir / "picard.csv",
                          check_profile=cfg["profile"] != "zero")
    bilin = []
    traj = out["trajectory"]
    for K in opts["bilinear_K_list"]:
        bilin.append({"K": K, "constant": bilinear_ratio(traj, traj, p.with_(K=K))})
    return {
        "iterations": out["iterations"],
        "x_norm": out["x_norm"],
        "radius": out["radius"],
        "in_ball": out["in_ball"],
        "converged": out["converged"],
        "contraction_ratios": out["contraction_ratios"],
        "rows": out["log_rows"],
        "bilinear": bilin,
        "files": {"picard.csv": "picard.csv"},
    }


def _exp_assumption_check(cfg, outdir):
    p = _params_from(cfg)
    g = _grid_from(cfg, p)
    prof = _profile_from(cfg, p, g)
    return check_assumptions(prof, p)


RUNNERS = {
    "weight-lemma": _exp_weight_lemma,
    "toy-energy": _exp_toy_energy,
    "stokes-multipliers": _exp_stokes_multipliers,
    "airy-bounds": _exp_airy_bounds,
    "contraction-sweep": _exp_contraction_sweep,
    "linear-solve": _exp_linear_solve,
    "theorem-scaling": _exp_theorem_scaling,
    "nonlinear-picard": _exp_nonlinear_picard,
    "assumption-check": _exp_assumption_check,
}


# ----------------------------------------------------------------------
# plot-data export
# ----------------------------------------------------------------------
PLOT_COLUMNS = {
    "contraction-sweep": ["K", "q"],
    "stokes-multipliers": ["j", "K", "alpha", "lambda", "measured_constant",
                           "kind"],
    "theorem-scaling": ["nu", "ratio"],
    "toy-energy": ["dt", "residual_relative"],
    "airy-bounds": ["theta", "K", "constant"],
    "weight-lemma": ["nu", "K", "name", "lhs", "rhs", "pass"],
    "nonlinear-picard": ["m", "x_norm", "increment", "residual"],
}


def export_plotdata(report: dict, kind: str, directory: str | Path) -> Path:
    """Tidy one-observation-per-row CSV for a report; header-only when
    the report carries no rows."""
    if kind not in PLOT_COLUMNS:
        raise ValueError(f"no plot-data layout for kind {kind!r}")
    cols = PLOT_COLUMNS[kind]
    path = Path(directory) / f"{kind}.csv"
    rows = report.get("rows", [])
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        wr.writeheader()
        for row in rows:
            wr.writerow(row)
    return path


# ----------------------------------------------------------------------
# entry points
# ----------------------------------------------------------------------
def _artifact_dir(name: str) -> Path:
    root = Path(os.environ.get("GEVREYLAB_ARTIFACTS", "artifacts"))
    stamp = time.strftime("%Y%m%d-%H%M%S")
    out = root / f"{name}-{stamp}"
    n = 0
    while out.exists():
        n += 1
        out = root / f"{name}-{stamp}-{n}"
    out.mkdir(parents=True)
    return out


def run_experiment(cfg: dict) -> Path:
    name = cfg["experiment"]
    outdir = _artifact_dir(name)
    report = RUNNERS[name](cfg, outdir)
    files = dict(report.pop("files", {}))

    report_path = outdir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True,
                                      default=float) + "\n")
    files["report.json"] = "report.json"
    if name in PLOT_COLUMNS:
        csv_path = export_plotdata(report, name, outdir)
        files[csv_path.name] = csv_path.name

    manifest = {
        "experiment": name,
        "version": __version__,
        "config": cfg,
        "files": sorted(files),
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return outdir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gevreylab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("config", nargs="?", help="TOML configuration file")
    run_p.add_argument("--experiment", help="experiment name (instead of a config)")
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path config override")

    sub.add_parser("list-experiments", help="print experiment names")

    val_p = sub.add_parser("validate", help="check a config without running")
    val_p.add_argument("config")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(name)
        return 0

    try:
        if args.command == "validate":
            load_config(args.config)
            print(f"{args.config}: ok")
            return 0

        if args.config and args.experiment:
            raise ConfigError("give either a config file or --experiment, not both")
        if args.config:
            with open(args.config, "rb") as fh:
                raw = tomllib.load(fh)
        elif args.experiment:
            raw = {"experiment": args.experiment}
        else:
            raise ConfigError("run needs a config file or --experiment")
        for assignment in args.overrides:
            _set_override(raw, assignment)
        cfg = resolve_config(raw)
    except (ConfigError, FileNotFoundError, tomllib.TOMLDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    try:
        outdir = run_experiment(cfg)
    except (RuntimeError, FloatingPointError, ValueError,
            np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1
    print(outdir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
