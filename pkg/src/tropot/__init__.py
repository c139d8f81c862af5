"""Optimal transport under the tropical (max-plus projective) ground metric.

Computes Wasserstein-1 and Wasserstein-2 distances, optimal fluxes and
geodesic density paths between probability densities discretized on a
uniform 2-D grid, with exact tropical primitives for arbitrary dimension and
independent brute-force oracles for validation.
"""

from .core import (
    hamiltonian,
    hamiltonian_argmax,
    trop_dist,
    trop_dual_norm,
    trop_dual_support,
    trop_norm,
)
from .densities import square_density, squares_density
from .grid import (
    DensityField,
    FluxField,
    GridSpec,
    Potential,
    div,
    grad,
    solve_neumann_poisson,
    solve_spacetime_poisson,
    time_derivative,
)
from .pdhg import ConvergenceReport, InfeasibleProblemError, SolverConfig
from .prox import (
    kinetic_flux_prox,
    largest_nonneg_root,
    trop_norm_2d_cases,
    tropical_shrink,
)
from .w1 import W1Problem, W1Solution, eikonal_residual, solve_w1
from .w2 import SpaceTimePath, W2Solution, continuity_residual, hj_inequality_check, solve_w2

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "trop_dist",
    "trop_norm",
    "trop_dual_norm",
    "trop_dual_support",
    "hamiltonian",
    "hamiltonian_argmax",
    "tropical_shrink",
    "kinetic_flux_prox",
    "largest_nonneg_root",
    "trop_norm_2d_cases",
    "GridSpec",
    "DensityField",
    "FluxField",
    "Potential",
    "grad",
    "div",
    "solve_neumann_poisson",
    "solve_spacetime_poisson",
    "time_derivative",
    "SolverConfig",
    "ConvergenceReport",
    "InfeasibleProblemError",
    "W1Problem",
    "W1Solution",
    "solve_w1",
    "eikonal_residual",
    "SpaceTimePath",
    "W2Solution",
    "solve_w2",
    "continuity_residual",
    "hj_inequality_check",
    "square_density",
    "squares_density",
]
