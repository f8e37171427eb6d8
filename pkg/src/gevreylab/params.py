"""Parameter bundle shared by every solver and diagnostic."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


def inverse_root_integer(nu: float, tol: float = 1e-9) -> int:
    """Return m = nu**-0.5 as an integer, or raise if it is not one."""
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    m = round(nu ** -0.5)
    if m < 1 or abs(m * m * nu - 1.0) > tol:
        raise ValueError(
            f"nu={nu} is not admissible: 1/sqrt(nu) = {nu ** -0.5:.6f} "
            "must be a positive integer"
        )
    return m


@dataclass(frozen=True)
class Params:
    """Scalar parameters of the weighted-norm framework.

    nu        : inverse Reynolds number, nu in (0,1] with nu**-1/2 integer
    K         : amplification parameter, K >= 1
    kappa     : cutoff rate in chi(Y) = 1 - exp(-kappa nu^{1/2} Y)
    c_star    : weight amplitude C_* >= 1
    c0_star,
    c1_star,
    c2_star   : background-flow constants (used by assumption checks)
    j_cap     : truncation order of the Gevrey sums, j_cap <= nu^{-1/2}
    j_y_cap   : hard cap on the order of numerical d/dY inside B_{j2}
    """

    nu: float
    K: float = 4.0
    kappa: float = 0.05
    c_star: float = 1.0
    c0_star: float = 1.0
    c1_star: float = 1.0
    c2_star: float = 1.0
    j_cap: int = field(default=-1)
    j_y_cap: int = 6

    def __post_init__(self) -> None:
        m = inverse_root_integer(self.nu)
        if self.K < 1.0:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.c_star < 1.0:
            raise ValueError(f"c_star must be >= 1, got {self.c_star}")
        if self.j_cap < 0:
            object.__setattr__(self, "j_cap", min(m, 16))
        if self.j_cap > m:
            raise ValueError(f"j_cap={self.j_cap} exceeds nu^(-1/2)={m}")
        if self.j_y_cap < 1:
            raise ValueError("j_y_cap must be >= 1")

    @property
    def root_nu(self) -> float:
        return self.nu ** 0.5

    @property
    def m_int(self) -> int:
        """nu^{-1/2} as an exact integer."""
        return inverse_root_integer(self.nu)

    @property
    def tau_end(self) -> float:
        """Length of the time window (0, 1/(K nu^{1/2})]."""
        return 1.0 / (self.K * self.root_nu)

    def with_(self, **kw) -> "Params":
        return replace(self, **kw)
