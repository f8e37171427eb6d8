"""Shared vorticity-form time stepping machinery.

Every evolution in the package is of the form

    d omega / d tau = nu^{1/2} Delta omega - damp * omega + E(omega, phi) + S

per Fourier mode in X, with omega = 0 at Y=0 (vorticity Dirichlet) and at
y_max.  Diffusion and damping are treated implicitly through the
symmetric flux-form operator; E gathers the explicit couplings.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solveh_banded

from .grid import Grid

__all__ = ["DiffusionSolver", "cfl_advective_limit"]


class DiffusionSolver:
    """Banded solves of (C + mu (damp C + s(M + alpha^2 C))) x = C b per mode.

    The system matrix is symmetric positive definite for mu, damp >= 0;
    walls carry homogeneous Dirichlet values.
    """

    def __init__(self, grid: Grid, s_coef: float, damp: float = 0.0):
        self.grid = grid
        self.s = s_coef
        self.damp = damp
        self._cache: dict = {}

    def _banded(self, mu: float, alpha_sq: float) -> np.ndarray:
        key = (mu, alpha_sq)
        ab = self._cache.get(key)
        if ab is None:
            g = self.grid
            w = g.w_y[1:-1]
            d = w * (1.0 + mu * (self.damp + self.s * alpha_sq)) \
                + mu * self.s * g.m_diag[1:-1]
            e = mu * self.s * g.m_off[1:-1]
            ab = np.zeros((2, len(d)))
            ab[0, 1:] = e
            ab[1] = d
            self._cache[key] = ab
        return ab

    def solve(self, mu: float, rhs: np.ndarray) -> np.ndarray:
        """Solve per mode along the last axis; rhs shape (n_x, n_y).

        rhs is the full right-hand side *field* b; the weak form multiplies
        by the quadrature weights internally.  Walls come back as zeros.
        """
        return self.solve_weighted(mu, self.grid.w_y * rhs)

    def solve_weighted(self, mu: float, bw: np.ndarray) -> np.ndarray:
        """Same solve, but bw is already the weak-form right-hand side C b."""
        g = self.grid
        out = np.zeros_like(bw, dtype=complex)
        for k, a in enumerate(g.alpha_values):
            ab = self._banded(mu, float(a) ** 2)
            b = bw[k, 1:-1]
            out[k, 1:-1] = solveh_banded(ab, b.real) + 1j * solveh_banded(ab, b.imag)
        return out

    def apply_operator(self, omega: np.ndarray) -> np.ndarray:
        """damp*omega - s*Delta_h omega on interior nodes (wall rows zero)."""
        g = self.grid
        lap = g.laplacian_y_dirichlet(omega) + g.diff_x(omega, 2)
        out = self.damp * omega - self.s * lap
        out[..., 0] = 0.0
        out[..., -1] = 0.0
        return out


def cfl_advective_limit(grid: Grid, vmax1: float, vmax2: float) -> float:
    """Largest stable-ish dt for the explicit transport terms (AB2)."""
    alpha_max = float(np.max(np.abs(grid.alpha_values))) or 1.0
    h_min = float(np.min(grid.h_y))
    rate = alpha_max * max(vmax1, 1e-30) + max(vmax2, 0.0) / h_min
    return 0.5 / rate if rate > 0 else np.inf
