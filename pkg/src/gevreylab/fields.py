"""Field containers and on-disk formats.

Scalar unknowns live as Fourier amplitudes in X and collocation values
in Y, one slab per stored time.  Real-valued physical fields carry a
parity flag meaning conjugate symmetry across +-alpha.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid

MAGIC = b"PGLF"
VERSION = 1

__all__ = [
    "SpectralField",
    "BoundaryTrace",
    "Trajectory",
    "write_field_binary",
    "read_field_binary",
    "write_field_csv",
    "write_trace_csv",
    "read_trace_csv",
]


def conjugate_asymmetry(data: np.ndarray) -> float:
    """Max relative deviation from conjugate symmetry across +-alpha."""
    flipped = np.conj(np.roll(data[..., ::-1, :], 1, axis=-2))
    scale = np.max(np.abs(data)) or 1.0
    return float(np.max(np.abs(data - flipped)) / scale)


@dataclass
class SpectralField:
    """Time-indexed scalar field: data[(time), alpha, Y]."""

    grid: Grid
    data: np.ndarray
    parity: bool = True

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape[-1] != self.grid.n_y or self.data.shape[-2] != self.grid.n_x:
            raise ValueError(
                f"data shape {self.data.shape} incompatible with grid "
                f"({self.grid.n_x} modes x {self.grid.n_y} nodes)"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values in field data")

    @classmethod
    def zeros(cls, grid: Grid, n_times: int | None = None) -> "SpectralField":
        shape = (grid.n_x, grid.n_y) if n_times is None else (n_times, grid.n_x, grid.n_y)
        return cls(grid, np.zeros(shape, dtype=complex))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.data.copy(), self.parity)

    def check_parity(self, tol: float = 1e-12) -> bool:
        return conjugate_asymmetry(self.data) <= tol


@dataclass
class BoundaryTrace:
    """h(tau, X) at Y=0, Fourier amplitudes in X per time sample."""

    grid: Grid
    values: np.ndarray
    compact_support: bool = True

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_t + 1, self.grid.n_x):
            raise ValueError(
                f"trace shape {self.values.shape} != "
                f"({self.grid.n_t + 1}, {self.grid.n_x})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values in boundary trace")

    @classmethod
    def zeros(cls, grid: Grid) -> "BoundaryTrace":
        return cls(grid, np.zeros((grid.n_t + 1, grid.n_x), dtype=complex))

    def copy(self) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values.copy(), self.compact_support)

    def support_ok(self, tol: float = 1e-12) -> bool:
        scale = np.max(np.abs(self.values)) or 1.0
        return float(np.max(np.abs(self.values[0]))) <= tol * scale


@dataclass
class Trajectory:
    """Solver output over the full time window."""

    omega: SpectralField
    phi: SpectralField
    bc_kind: str
    forcing: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.omega.grid

    def poisson_residual(self) -> float:
        """Relative residual of -Delta phi = omega over stored times."""
        g = self.grid
        lap = g.laplacian_y_dirichlet(self.phi.data) + g.diff_x(self.phi.data, 2)
        num = np.linalg.norm((-lap - self.omega.data)[..., 1:-1])
        den = np.linalg.norm(self.omega.data[..., 1:-1]) or 1.0
        return float(num / den)


# ----------------------------------------------------------------------
# binary format
# ----------------------------------------------------------------------
def write_field_binary(path: str | Path, data: np.ndarray) -> None:
    """Dump a complex array of shape (n_t, n_x, n_y) in the PGLF format."""
    data = np.asarray(data, dtype=complex)
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3:
        raise ValueError("expected a (n_t, n_x, n_y) array")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<QQQ", *data.shape))
        inter = np.empty(data.shape + (2,), dtype="<f8")
        inter[..., 0] = data.real
        inter[..., 1] = data.imag
        inter.tofile(f)


def read_field_binary(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path}: bad magic bytes")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        dims = struct.unpack("<QQQ", f.read(24))
        raw = np.fromfile(f, dtype="<f8", count=2 * int(np.prod(dims)))
    raw = raw.reshape(*dims, 2)
    return raw[..., 0] + 1j * raw[..., 1]


# ----------------------------------------------------------------------
# CSV exports
# ----------------------------------------------------------------------
def write_field_csv(path: str | Path, field_: SpectralField) -> None:
    g = field_.grid
    data = field_.data if field_.data.ndim == 3 else field_.data[None]
    taus = g.tau_nodes
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau", "alpha_index", "y", "re", "im"])
        for it in range(data.shape[0]):
            tau = taus[it] if it < len(taus) else it * g.dt
            for ik in range(g.n_x):
                for iy in range(g.n_y):
                    z = data[it, ik, iy]
                    w.writerow([f"{tau:.12g}", ik, f"{g.y_nodes[iy]:.12g}",
                                f"{z.real:.17g}", f"{z.imag:.17g}"])


def write_trace_csv(path: str | Path, trace: BoundaryTrace) -> None:
    g = trace.grid
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau", "alpha_index", "re", "im"])
        for it, tau in enumerate(g.tau_nodes):
            for ik in range(g.n_x):
                z = trace.values[it, ik]
                w.writerow([f"{tau:.12g}", ik, f"{z.real:.17g}", f"{z.imag:.17g}"])


def read_trace_csv(path: str | Path, grid: Grid) -> BoundaryTrace:
    values = np.zeros((grid.n_t + 1, grid.n_x), dtype=complex)
    taus = grid.tau_nodes
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            tau = float(row["tau"])
            it = int(round(tau / grid.dt))
            if not (0 <= it <= grid.n_t) or abs(taus[it] - tau) > 1e-9 * max(1.0, tau):
                raise ValueError(f"trace sample at tau={tau} is off the time grid")
            values[it, int(row["alpha_index"])] = float(row["re"]) + 1j * float(row["im"])
    return BoundaryTrace(grid, values)
