"""Difference-kernel (2-D convolution) operators on a rectangle.

Discretizes identity-plus-convolution operators with midpoint collocation,
verifies their displacement identities, computes the rho-function of the
inverse both directly and through the structured g/theta/psi
representation, and reconstructs inverse operators from rho exactly at
the discrete level.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DiffKernError,
    InvalidArgumentError,
    KernelEvaluationError,
    NearSingularGError,
    PoleProximityError,
    SingularOperatorError,
    UnsupportedEvaluationError,
)
from .grid import (
    GridFn,
    GridSpec,
    KernelModel,
    KernelSamples,
    LineFn,
    PairFn,
    make_grid,
    normalize_kernel,
    sample_kernel,
)
from .kernels import (
    exp_kernel,
    gaussian_kernel,
    identity_kernel,
    poly_kernel,
    separable_kernel,
    with_profiles,
)
from .operators import (
    ConvOperator,
    LinOp,
    PiPair,
    assemble_pi,
    conv_apply,
    displacement_identity_residual,
    displacement_rank,
    k_op,
    m4_identity_residual,
    m_op,
)
from .inversion import (
    GMatrix,
    RhoEvaluator,
    RhoTable,
    build_rho_evaluator,
    build_rho_table,
    check_difference_kernel,
    compute_g,
    g_symmetry_residual,
    gamma_apply,
    inverse_from_rho,
    psi,
    rho_direct,
    rho_structured,
    solve,
    theta,
)

__version__ = "0.1.0"
