"""Approximation of multipartite density matrices by convex combinations
of states that remain positive semidefinite under a partial transpose,
via a linearized proximal ADMM on a penalized splitting model."""

from .errors import (
    ArityError,
    BipptError,
    ConfigError,
    DomainError,
    ModelError,
    NumericalError,
    ShapeError,
)
from .objective import (
    ModelProblem,
    PrimalDualPoint,
    augmented_lagrangian,
    grad_f_x,
    grad_f_y,
    gram,
    hessian_blocks,
    objective_f,
)
from .operators import (
    AuxStack,
    ComponentStack,
    OperatorA,
    apply_A,
    apply_A_adjoint,
    materialize_A,
    mat,
    vec,
    verify_operator_identity,
)
from .prox import (
    SimplexQP,
    p_update,
    project_psd,
    project_simplex,
    project_trace_one,
    solve_simplex_qp,
    x_update,
    z_update,
)
from .solver import (
    IterationRecord,
    ParamCheck,
    SolveResult,
    SolverParams,
    TrialsResult,
    descent_certificate,
    init_point,
    run_trials,
    solve,
    stationarity_residuals,
    step,
    validate_params,
    write_trace_csv,
)
from .states import (
    Bipartition,
    DensityMatrix,
    DensityReport,
    SubsystemDims,
    check_density,
    enumerate_bipartitions,
    ghz_vector,
    make_state,
    partial_transpose,
    read_state_text,
    symmetrize,
    w_vector,
    weighted_ghz_vector,
    write_state_text,
)

__version__ = "0.1.0"
