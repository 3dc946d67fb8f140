"""Solvers for monotone eigenvector-dependent nonlinear eigenvalue problems.

The problem class: H(x) x = lambda x with H(x) = sum_i h_i(x^H A_i x) A_i,
Hermitian A_i, non-decreasing h_i, and lambda the largest eigenvalue of
H(x).  Solving it maximizes F(x) = sum_i phi_i(x^H A_i x) (phi_i' = h_i)
over the unit sphere.  The package provides the SCF iteration with a
monotone acceleration, stability classification of solutions, and
front-ends for numerical radius, partial-symmetric tensor rank-one
approximation, and dHDAE distance-to-singularity bounds.
"""

from .apps import (
    DhdaeBound,
    RankOneResult,
    TensorPS3,
    als_reference,
    dhdae_distance,
    dhdae_problem,
    joint_numrad,
    numerical_radius,
    numrad_problem,
    tensor_rank_one,
)
from .errors import (
    DegenerateTensorError,
    DimensionMismatchError,
    EigenConvergenceError,
    InternalConsistencyError,
    IterativeSolveError,
    MnepvError,
    MonotonicityError,
    NoConvergenceError,
    NonHermitianError,
    ParseError,
    SingularProblemError,
    SingularShiftError,
)
from .linalg import EigDecomposition, LinearOperator, eig_full, largest_eigpair, solve_shifted
from .problem import (
    Classification,
    MNepvProblem,
    MonotoneFn,
    StabilityReport,
    as_hermitian,
    assemble_h,
    dh_directional,
    objective,
    operator_L_rho,
    parse_monotone_fn,
    phi_char,
    residual,
    rho_map,
)
from .solver import (
    AccelStatus,
    Cluster,
    IterationRecord,
    MultistartResult,
    SolveOptions,
    SolveReport,
    SupportingPoint,
    accel_step,
    greedy_init,
    jacobian_sym,
    multistart,
    sample_directions,
    scf_step,
    solve,
    sphere_grid,
    supporting_points,
    theta_grid,
)
from .vectors import normalize_unit, phase_normalize, vec_angle

__version__ = "0.1.0"
