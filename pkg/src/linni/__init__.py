"""Radial solutions of -Delta u + mu u = |u|^{p-2} u on balls with Neumann data.

Shooting, continuation, Green's function masses, bubble asymptotics and
integral audits for the radial problem.
"""

from .errors import (
    DimensionError,
    DivergentMoment,
    InsufficientRange,
    InsufficientTail,
    IntegrationError,
    KernelError,
    LinniError,
    NoSignChange,
    NonConvergence,
    NumericalFailure,
    RegimeError,
    StallError,
    UnsupportedDimension,
)
from .radial_ode import (
    Profile,
    RadialProblem,
    critical_exponent,
    integrate,
    integrate_linearized,
    integrate_sensitivities,
    read_profile_csv,
    write_profile_csv,
)
from .bvp import (
    NondegReport,
    ShootingResult,
    exceptional_radii_dim6,
    nondegeneracy_check,
    radial_neumann_eigenvalues,
    scaling_transport,
    scan_solutions,
    solve_neumann,
)
from .continuation import Branch, StopCriteria, bifurcation_diagram, detect_bifurcations, trace_branch
from .greenmass import exceptional_radius_dim3, green_radial, mass_at_origin
from .asymptotics import ReducedEnergyModel, classify_blowup, constants_table
from .diagnostics import lp_norm, monotonicity_audit, pohozaev_potential_residual, pohozaev_residual

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "DimensionError",
    "DivergentMoment",
    "InsufficientRange",
    "InsufficientTail",
    "IntegrationError",
    "KernelError",
    "LinniError",
    "NoSignChange",
    "NonConvergence",
    "NondegReport",
    "NumericalFailure",
    "Profile",
    "RadialProblem",
    "ReducedEnergyModel",
    "RegimeError",
    "ShootingResult",
    "StallError",
    "StopCriteria",
    "UnsupportedDimension",
    "bifurcation_diagram",
    "classify_blowup",
    "constants_table",
    "critical_exponent",
    "detect_bifurcations",
    "exceptional_radii_dim6",
    "exceptional_radius_dim3",
    "green_radial",
    "integrate",
    "integrate_linearized",
    "integrate_sensitivities",
    "lp_norm",
    "mass_at_origin",
    "monotonicity_audit",
    "nondegeneracy_check",
    "pohozaev_potential_residual",
    "pohozaev_residual",
    "radial_neumann_eigenvalues",
    "read_profile_csv",
    "scaling_transport",
    "scan_solutions",
    "solve_neumann",
    "trace_branch",
    "write_profile_csv",
]
