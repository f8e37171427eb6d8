"""Numerical laboratory for Gevrey-weighted stability estimates of
boundary-layer flows in a half plane.

The package evolves the linearized vorticity equation around a
background shear on a rescaled half-plane strip, builds the three-stage
boundary corrector restoring the no-slip condition, and measures the
weighted-norm inequalities that control the construction.
"""

from .fields import BoundaryTrace, SpectralField, Trajectory
from .grid import Grid, build_grid
from .params import Params
from .profiles import (
    BackgroundProfile,
    check_assumptions,
    make_custom_profile,
    make_shear_heat_profile,
    make_zero_profile,
)

__version__ = "0.1.0"

__all__ = [
    "BackgroundProfile",
    "BoundaryTrace",
    "Grid",
    "Params",
    "SpectralField",
    "Trajectory",
    "build_grid",
    "check_assumptions",
    "make_custom_profile",
    "make_shear_heat_profile",
    "make_zero_profile",
    "__version__",
]
