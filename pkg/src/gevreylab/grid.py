"""Discretization of the rescaled half plane and its linear-algebra kernels.

The horizontal direction is the torus of circumference 2*pi*nu^{-1/2},
handled by FFT with wavenumbers alpha = nu^{1/2} * n (n integer).  The
vertical direction uses an algebraically stretched grid clustered at Y=0.

Two vertical second-derivative discretizations coexist on purpose:

* a conservative flux-form second difference (attribute ``m_diag``/``m_off``)
  which is exactly symmetric with respect to the trapezoid quadrature
  weights.  Every solve (Poisson, implicit diffusion) uses this operator,
  so discrete integration-by-parts identities hold to roundoff;
* wide-stencil matrices of order >= 4 (``diff``) used for diagnostics,
  velocity reconstruction and the B_{j2} derivative strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded

from .params import Params, inverse_root_integer

__all__ = ["Grid", "build_grid", "fornberg_weights"]


def fornberg_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 on given nodes.

    Classic recursion; exact for polynomials of degree < len(nodes).
    """
    n = len(nodes)
    if order >= n:
        raise ValueError("stencil too small for requested derivative order")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable discretization of (tau, X, Y)."""

    nu: float
    K: float
    n_x: int
    n_y: int
    y_max: float
    stretch: float
    dt: float
    n_t: int
    alpha_values: np.ndarray = field(repr=False)
    y_nodes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.alpha_values.setflags(write=False)
        self.y_nodes.setflags(write=False)

    # ------------------------------------------------------------------
    # basic geometry
    # ------------------------------------------------------------------
    @property
    def m_int(self) -> int:
        return inverse_root_integer(self.nu)

    @property
    def x_length(self) -> float:
        return 2.0 * math.pi * self.m_int

    @property
    def x_nodes(self) -> np.ndarray:
        return np.arange(self.n_x) * (self.x_length / self.n_x)

    @property
    def tau_nodes(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt

    @property
    def tau_end(self) -> float:
        return self.n_t * self.dt

    # cached derived arrays ------------------------------------------------
    @property
    def h_y(self) -> np.ndarray:
        """Consecutive spacings of y_nodes, length n_y - 1."""
        return self._geom()[0]

    @property
    def w_y(self) -> np.ndarray:
        """Trapezoid quadrature weights on y_nodes, length n_y."""
        return self._geom()[1]

    @lru_cache(maxsize=1)
    def _geom(self):
        h = np.diff(self.y_nodes)
        w = np.zeros(self.n_y)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        h.setflags(write=False)
        w.setflags(write=False)
        return h, w

    # ------------------------------------------------------------------
    # transforms
    # ------------------------------------------------------------------
    def to_coefficients(self, physical: np.ndarray, axis: int = -2) -> np.ndarray:
        """Physical X samples -> Fourier amplitudes (f = sum c_a e^{i a X})."""
        if physical.shape[axis] != self.n_x:
            raise ValueError("X axis size mismatch")
        return np.fft.fft(physical, axis=axis) / self.n_x

    def to_physical(self, coeffs: np.ndarray, axis: int = -2) -> np.ndarray:
        if coeffs.shape[axis] != self.n_x:
            raise ValueError("X axis size mismatch")
        return np.fft.ifft(coeffs, axis=axis) * self.n_x

    # ------------------------------------------------------------------
    # derivatives
    # ------------------------------------------------------------------
    def diff_x(self, coeffs: np.ndarray, order: int = 1) -> np.ndarray:
        """Exact spectral d/dX: multiply mode alpha by (i alpha)**order."""
        shape = [1] * coeffs.ndim
        shape[-2] = self.n_x
        fac = (1j * self.alpha_values) ** order
        return coeffs * fac.reshape(shape)

    @lru_cache(maxsize=16)
    def _dy_matrix(self, order: int) -> sp.csr_matrix:
        n = self.n_y
        width = min(max(5, order + 3), n)
        rows, cols, vals = [], [], []
        half = width // 2
        for i in range(n):
            lo = min(max(0, i - half), n - width)
            idx = np.arange(lo, lo + width)
            w = fornberg_weights(self.y_nodes[i], self.y_nodes[idx], order)
            rows.extend([i] * width)
            cols.extend(idx.tolist())
            vals.extend(w.tolist())
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def diff_y(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """d/dY of order >= 1 along the last axis, 5-point (or wider) stencils."""
        if order == 0:
            return values.copy()
        d = self._dy_matrix(order)
        flat = values.reshape(-1, self.n_y)
        out = (d @ flat.T).T
        return np.asarray(out).reshape(values.shape)

    def diff(self, coeffs: np.ndarray, axis: str, order: int = 1) -> np.ndarray:
        if axis == "X":
            return self.diff_x(coeffs, order)
        if axis == "Y":
            return self.diff_y(coeffs, order)
        raise ValueError(f"axis must be 'X' or 'Y', got {axis!r}")

    # ------------------------------------------------------------------
    # symmetric flux-form Laplacian pieces
    # ------------------------------------------------------------------
    @lru_cache(maxsize=1)
    def _flux_form(self):
        """Tridiagonal M with u^H M u = sum |du|^2 / h, natural ends."""
        h = self.h_y
        n = self.n_y
        main = np.zeros(n)
        main[:-1] += 1.0 / h
        main[1:] += 1.0 / h
        off = -1.0 / h
        main.setflags(write=False)
        off.setflags(write=False)
        return main, off

    @property
    def m_diag(self) -> np.ndarray:
        return self._flux_form()[0]

    @property
    def m_off(self) -> np.ndarray:
        return self._flux_form()[1]

    def apply_m(self, v: np.ndarray) -> np.ndarray:
        """Apply the symmetric second-difference matrix M along last axis."""
        out = v * self.m_diag
        out[..., :-1] += v[..., 1:] * self.m_off
        out[..., 1:] += v[..., :-1] * self.m_off
        return out

    def laplacian_y_dirichlet(self, v: np.ndarray) -> np.ndarray:
        """Flux-form d2/dY2 on interior nodes; boundary rows returned as 0.

        This is the exact operator inverted by the Poisson and implicit
        diffusion solves (after adding the -alpha^2 spectral part).
        """
        out = -self.apply_m(v) / self.w_y
        out[..., 0] = 0.0
        out[..., -1] = 0.0
        return out

    # ------------------------------------------------------------------
    # Poisson solve
    # ------------------------------------------------------------------
    @lru_cache(maxsize=256)
    def _poisson_banded(self, alpha_sq: float):
        """Upper banded form of the SPD system for one mode.

        alpha != 0: interior nodes 1..n-2, Dirichlet both ends.
        alpha == 0: nodes 1..n-1, Dirichlet at 0, zero flux at y_max.
        """
        main, off = self._flux_form()
        w = self.w_y
        if alpha_sq > 0.0:
            d = main[1:-1] + alpha_sq * w[1:-1]
            e = off[1:-1]
        else:
            d = main[1:].copy()
            e = off[1:]
        ab = np.zeros((2, len(d)))
        ab[0, 1:] = e
        ab[1] = d
        ab.setflags(write=False)
        return ab

    def solve_poisson_mode(self, alpha: float, omega_y: np.ndarray) -> np.ndarray:
        """Solve (-d2/dY2 + alpha^2) phi = omega, phi(0)=0, decaying closure."""
        alpha_sq = float(alpha) * float(alpha)
        ab = self._poisson_banded(alpha_sq)
        w = self.w_y
        phi = np.zeros_like(omega_y, dtype=complex)
        if alpha_sq > 0.0:
            rhs = w[1:-1] * omega_y[..., 1:-1]
            sol = _solveh_complex(ab, rhs)
            phi[..., 1:-1] = sol
        else:
            rhs = w[1:] * omega_y[..., 1:]
            sol = _solveh_complex(ab, rhs)
            phi[..., 1:] = sol
        return phi

    def solve_poisson(self, omega: np.ndarray) -> np.ndarray:
        """Per-mode Poisson solve -Delta phi = omega on (..., n_x, n_y) coeffs."""
        phi = np.empty_like(omega, dtype=complex)
        for k, a in enumerate(self.alpha_values):
            phi[..., k, :] = self.solve_poisson_mode(a, omega[..., k, :])
        return phi

    # ------------------------------------------------------------------
    # norms and quadrature
    # ------------------------------------------------------------------
    def integral_y(self, values: np.ndarray) -> np.ndarray:
        """Trapezoid integral over Y along the last axis."""
        return values @ self.w_y

    def norm_l2_xy(self, coeffs: np.ndarray) -> np.ndarray:
        """L2(X,Y) norm of a coefficient field (..., n_x, n_y)."""
        dens = np.abs(coeffs) ** 2 @ self.w_y
        return np.sqrt(self.x_length * dens.sum(axis=-1))


def _solveh_complex(ab: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    flat = rhs.reshape(-1, rhs.shape[-1]).T
    if np.iscomplexobj(flat):
        out = solveh_banded(ab, flat.real) + 1j * solveh_banded(ab, flat.imag)
    else:
        out = solveh_banded(ab, flat)
    return out.T.reshape(rhs.shape)


def build_grid(
    params: Params,
    n_x: int,
    n_y: int,
    y_max: float,
    dt: float,
    stretch: float = 4.0,
) -> Grid:
    """Build the discretization of the rescaled half plane.

    The vertical nodes follow Y(s) = stretch * s / (1 - s) with s uniform
    on [0, s_max], s_max = y_max / (stretch + y_max), clustering near Y=0.
    The time step is shrunk (never grown) so an integer number of steps
    covers exactly (0, 1/(K nu^{1/2})].
    """
    if n_x < 4 or n_y < 4:
        raise ValueError("need n_x >= 4 and n_y >= 4")
    if y_max <= 0 or dt <= 0 or stretch <= 0:
        raise ValueError("y_max, dt and stretch must be positive")
    m = inverse_root_integer(params.nu)

    n_int = np.rint(np.fft.fftfreq(n_x, 1.0 / n_x)).astype(int)
    alpha = params.root_nu * n_int

    s_max = y_max / (stretch + y_max)
    s = np.linspace(0.0, s_max, n_y)
    y = stretch * s / (1.0 - s)
    y[-1] = y_max

    window = params.tau_end
    n_t = max(2, math.ceil(window / dt - 1e-12))
    dt_eff = window / n_t

    return Grid(
        nu=params.nu,
        K=params.K,
        n_x=n_x,
        n_y=n_y,
        y_max=y_max,
        stretch=stretch,
        dt=dt_eff,
        n_t=n_t,
        alpha_values=alpha,
        y_nodes=y,
    )
