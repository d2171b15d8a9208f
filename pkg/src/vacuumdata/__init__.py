"""Spherically symmetric vacuum initial data with prescribed mean curvature."""

from .errors import (
    ConstructionFailedError,
    DegenerateFitError,
    EvaluationOutOfRangeError,
    InvalidArgumentError,
    NegativeRadicandError,
    NoConvergenceError,
    NonpositiveIterateError,
    NotMonotoneError,
    NoTailError,
    ProfileParseError,
    SchemaError,
    SingularSystemError,
    TailTooSlowError,
    VacuumDataError,
)
from .radial import (
    Dimension,
    RadialGrid,
    RadialProfile,
    TailModel,
    build_grid,
    differentiate,
    fit_tail,
    integrate_from_zero,
    integrate_to_infinity,
    read_profile_csv,
    write_profile_csv,
)
from .conformal import (
    ConformalSolution,
    InitialData,
    SeedData,
    assemble_initial_data,
    build_solution,
    divergence_source,
    lichnerowicz_residual,
    lw_norm,
    momentum_potential,
    read_solution_csv,
    tau_from_phi,
    vector_potential,
    write_solution_csv,
)
from .solver import (
    SolveControls,
    SolveTrace,
    fixed_point_solve,
    smooth_schwarzschild_phi,
    solve_lichnerowicz,
    solve_radial_helmholtz,
)
from .verify import (
    DecayReport,
    MassReport,
    ResidualReport,
    SolutionChecks,
    adm_mass_radial,
    adm_mass_surface,
    check_solution,
    constraint_report,
    decay_exponents,
    default_sample_points,
    hamiltonian_residual,
    momentum_residual,
    tail_limit_check,
)
from .cli import ScenarioConfig, render_report, run

__version__ = "0.1.0"
