"""Numerical laboratory for a degenerate diffusion-transport equation in its
original, Lagrangian and self-similar formulations: closed-form ground truth,
P1 finite elements, operator-splitting integrators and the study harnesses
that cross-validate them."""

from .mesh import (
    FORMS,
    Field,
    RectDomain,
    TriMesh,
    build_structured_mesh,
    element_quadrature,
    interpolate,
    interpolate_many,
)
from .sparse import SolveStats, SparseMatrix, from_triplets, solve
from .analytic import (
    FormulationTime,
    GaussianIC,
    GaussianSum,
    QuadratureError,
    convolution_oracle,
    domain_condition,
    exact_lagrangian,
    exact_original,
    exact_selfsimilar,
    exact_solution,
    gaussian_ic,
    kernel_G,
    kernel_Lq_norm,
    linf_envelope,
    map_variables,
    poincare_constant,
    steady_state,
)
from .assembly import (
    OperatorBlocks,
    OperatorSet,
    SplitParams,
    assemble_blocks,
    assemble_heat_v,
    assemble_lagrangian,
    assemble_mass,
    assemble_selfsimilar_K1,
    operator_set,
)
from .solvers import (
    RunConfig,
    SolverError,
    Trajectory,
    exact_splitting_unit_check,
    project_initial,
    run,
    run_lagrangian,
    run_original,
    run_selfsimilar,
)
from .analysis import (
    ErrorReport,
    FitResult,
    convergence_study,
    decay_fit,
    envelope_check,
    l2_error,
    linf_error,
    nested_domain_study,
    norm_timeseries,
    pairwise_orders,
    percent_diff,
    poincare_check,
)

__version__ = "0.1.0"
