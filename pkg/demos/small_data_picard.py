"""Small-data Picard iteration for the nonlinear problem.

The data is normalized to the smallness pattern delta0 * nu^{9/4}; the
quadratic remainder then contracts the iterates geometrically inside the
ball of radius 4 delta0 nu^{7/4}.

    python3 demos/small_data_picard.py
"""

import numpy as np

from gevreylab.grid import build_grid
from gevreylab.nonlinear import solve_nonlinear
from gevreylab.params import Params
from gevreylab.profiles import make_shear_heat_profile


def main():
    p = Params(nu=1.0 / 16, K=64.0)
    g = build_grid(p, n_x=8, n_y=65, y_max=12.0, dt=p.tau_end / 48)
    prof = make_shear_heat_profile(p, g)

    y = g.y_nodes
    phi0 = np.zeros((g.n_x, g.n_y), complex)
    phi0[1] = (0.4 + 0.2j) * y ** 3 * np.exp(-y)
    phi0[g.n_x - 1] = np.conj(phi0[1])

    out = solve_nonlinear(prof, phi0, params=p, delta0=1e-4, tol=1e-9)
    print(f"data bracket:   {out['smallness']['data_bracket']:.3e}")
    print(f"ball radius:    {out['radius']:.3e}")
    print(f"{'m':>3} {'increment':>12} {'residual':>12}")
    st = out["state"]
    for m, (inc, res) in enumerate(zip(st.increments, st.residuals), start=1):
        print(f"{m:3d} {inc:12.4e} {res:12.4e}")
    print(f"final x_norm: {out['x_norm']:.4e}")
    print(f"converged: {out['converged']}  in_ball: {out['in_ball']}")


if __name__ == "__main__":
    main()
