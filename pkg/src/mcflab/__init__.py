"""Numerical laboratory for graphical mean curvature flow.

Computes reference translator profiles (grim reaper, tilted grim reaper
plane, bowl soliton, extracted Delta-wings), evolves perturbed graphs by
explicit finite differences in interval, slab and radial geometries, and
audits the quantitative estimates that control translator stability:
barrier squeezes, total-curvature monotonicity, the conserved shift
integral, Harnack residuals and Gaussian entropy.
"""

from .grids import Field, Grid1D, Grid2D, INTERVAL, RADIAL, SLAB2D
from .solver import (BoundaryPolicy, FlowState, SolverConfig, Trajectory,
                     cfl_dt, evolve)
from .translators import TranslatorProfile, bowl_profile, grim_reaper

__all__ = [
    "Field", "Grid1D", "Grid2D", "INTERVAL", "RADIAL", "SLAB2D",
    "BoundaryPolicy", "FlowState", "SolverConfig", "Trajectory",
    "cfl_dt", "evolve",
    "TranslatorProfile", "bowl_profile", "grim_reaper",
]
