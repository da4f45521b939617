"""rolldisc: constrained stochastic dynamics of a trimer of planar discs.

Three discs joined by unit-length links, center of mass pinned, optionally
rolling on one another without slipping.  The package integrates the
underdamped Langevin dynamics, its overdamped Cartesian limits (Stratonovich
and general-friction Ito forms) and the reduced shape-coordinate SDE, and
verifies the closed-form equilibrium shape densities, the stationary-flux
identity and the exactly conserved rolling quantities.
"""
from .analytics import (
    DENSITY_KINDS,
    DensityModel,
    GeometryTables,
    conserved_quantities,
    density_unnormalized,
    fixman_factor,
    fp_flux,
    fp_residual,
    subspace_overlap,
    tail_probability,
    tail_sweep,
    tangent_map_check,
)
from .dynamics_full import (
    LangevinResult,
    PhaseState,
    SimParams,
    default_initial,
    lagrange_multipliers,
    mass_scale,
    project_position,
    run_langevin,
    soft_bond_force,
    step,
)
from .dynamics_overdamped import (
    OverdampedResult,
    ReducedCoefficients,
    ReducedResult,
    ReducedState,
    parameterize,
    reduced_coefficients,
    run_cartesian,
    run_reduced,
    step_cartesian_general,
    step_cartesian_strat,
    step_reduced,
)
from .kernels import active_backend, thread_count
from .model import (
    Configuration,
    ConstraintSet,
    ContactError,
    NumericalRankError,
    ProjectionBundle,
    assemble,
    bond_row,
    gamma_p_dagger,
    rolling_row,
)
from .stats import (
    HistogramReport,
    KSReport,
    extract_omega,
    extract_phi,
    extract_reduced,
    ks_distance,
    make_histogram,
    two_sample_ks,
    velocity_covariance_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "DENSITY_KINDS",
    "DensityModel",
    "GeometryTables",
    "conserved_quantities",
    "density_unnormalized",
    "fixman_factor",
    "fp_flux",
    "fp_residual",
    "subspace_overlap",
    "tail_probability",
    "tail_sweep",
    "tangent_map_check",
    "LangevinResult",
    "PhaseState",
    "SimParams",
    "default_initial",
    "lagrange_multipliers",
    "mass_scale",
    "project_position",
    "run_langevin",
    "soft_bond_force",
    "step",
    "OverdampedResult",
    "ReducedCoefficients",
    "ReducedResult",
    "ReducedState",
    "parameterize",
    "reduced_coefficients",
    "run_cartesian",
    "run_reduced",
    "step_cartesian_general",
    "step_cartesian_strat",
    "step_reduced",
    "active_backend",
    "thread_count",
    "Configuration",
    "ConstraintSet",
    "ContactError",
    "NumericalRankError",
    "ProjectionBundle",
    "assemble",
    "bond_row",
    "gamma_p_dagger",
    "rolling_row",
    "HistogramReport",
    "KSReport",
    "extract_omega",
    "extract_phi",
    "extract_reduced",
    "ks_distance",
    "make_histogram",
    "two_sample_ks",
    "velocity_covariance_oracle",
    "__version__",
]
