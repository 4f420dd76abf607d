"""Solution paths of ridge-style convex problems by ODE discretization.

Computes eps-accurate paths {x(lambda)} of F_lambda(x) = f(x) + lambda Omega(x)
over a lambda interval by discretizing the path-following ODE, alongside
grid-search baselines, theory bound calculators, and a benchmark CLI.
"""

from .bounds import (
    BoundReport,
    StepSizeCheck,
    estimate_constants,
    estimate_f_gap,
    grid_epsilon_prime,
    k_euler,
    k_euler_approx,
    k_trapezoid,
    k_trapezoid_approx,
    lipschitz_v,
    step_bound_euler,
    step_bound_euler_approx,
    step_bound_trapezoid,
    step_bound_trapezoid_approx,
    stepsize_conditions,
)
from .datasets import (
    DatasetFormatError,
    generate_synthetic_logistic,
    generate_synthetic_quadratic,
    load_csv_dataset,
    load_moment_json,
    save_csv_dataset,
    save_moment_json,
    standardize_features,
)
from .gridsearch import (
    GridSearchConfig,
    GridSearchError,
    agd_inner,
    grid_k_from_eps,
    grid_points,
    solve_grid,
)
from .linsolve import (
    DirectionResult,
    NotPositiveDefiniteError,
    cg_iteration_bound,
    cg_solve,
    solve_spd,
)
from .paths import (
    PathKnot,
    PiecewiseConstantPath,
    PiecewiseLinearPath,
    accuracy_dense,
    accuracy_midpoint,
    export_path_csv,
    interpolate,
    residual_norm,
)
from .problems import (
    DegenerateProblemError,
    DomainError,
    ProblemOracle,
    TheoryConstants,
    build_moment_problem,
    generate_synthetic_moment_data,
    logistic_gradient_bound,
    make_logistic_reweighted,
    make_logistic_ridge,
    make_moment_matching,
    make_quadratic_ridge,
    quadratic_path_point,
    quadratic_theory_constants,
)
from .reports import OracleCounters, RunReport
from .steppers import (
    CGDirections,
    CGNoConvergenceError,
    ExactDirections,
    MaxIterationsError,
    PathRunError,
    StepDiagnostics,
    StepperConfig,
    decay_polynomial,
    euler_step,
    initialize_by_newton,
    initialize_from_omega,
    rk4_step,
    run_path,
    stepsize,
    trapezoid_step,
    vector_field,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CGDirections",
    "CGNoConvergenceError",
    "DatasetFormatError",
    "DegenerateProblemError",
    "DirectionResult",
    "DomainError",
    "ExactDirections",
    "GridSearchConfig",
    "GridSearchError",
    "MaxIterationsError",
    "NotPositiveDefiniteError",
    "OracleCounters",
    "PathKnot",
    "PathRunError",
    "PiecewiseConstantPath",
    "PiecewiseLinearPath",
    "ProblemOracle",
    "RunReport",
    "StepDiagnostics",
    "StepSizeCheck",
    "StepperConfig",
    "TheoryConstants",
    "accuracy_dense",
    "accuracy_midpoint",
    "agd_inner",
    "build_moment_problem",
    "cg_iteration_bound",
    "cg_solve",
    "decay_polynomial",
    "estimate_constants",
    "estimate_f_gap",
    "euler_step",
    "export_path_csv",
    "generate_synthetic_logistic",
    "generate_synthetic_moment_data",
    "generate_synthetic_quadratic",
    "grid_epsilon_prime",
    "grid_k_from_eps",
    "grid_points",
    "initialize_by_newton",
    "initialize_from_omega",
    "interpolate",
    "k_euler",
    "k_euler_approx",
    "k_trapezoid",
    "k_trapezoid_approx",
    "lipschitz_v",
    "load_csv_dataset",
    "load_moment_json",
    "logistic_gradient_bound",
    "make_logistic_reweighted",
    "make_logistic_ridge",
    "make_moment_matching",
    "make_quadratic_ridge",
    "quadratic_path_point",
    "quadratic_theory_constants",
    "residual_norm",
    "rk4_step",
    "run_path",
    "save_csv_dataset",
    "save_moment_json",
    "solve_grid",
    "solve_spd",
    "standardize_features",
    "step_bound_euler",
    "step_bound_euler_approx",
    "step_bound_trapezoid",
    "step_bound_trapezoid_approx",
    "stepsize",
    "stepsize_conditions",
    "trapezoid_step",
    "vector_field",
]
