"""Solvers and experiments for multi-layer basis pursuit."""

from .linalg import (
    ConvergenceError,
    DenseOperator,
    DimensionError,
    LinearOperator,
    adjoint_matvec,
    compose_dictionaries,
    matvec,
    spectral_norm,
)
from .model import (
    MultiLayerModel,
    QuadraticData,
    TheoremConstants,
    fixed_point_residual,
    gradient_mapping,
    objective,
    recovery_error,
    theorem_constants,
)
from .prox import (
    ProxSpec,
    moreau_envelope_l1,
    nonneg_soft_threshold,
    prox_l1_ball,
    soft_threshold,
)
from .solvers import (
    SolverParams,
    Trace,
    admm,
    feed_forward,
    fista,
    ista,
    layered_bp,
    ml_fista,
    ml_ista_canonical,
    ml_ista_layered,
    ml_lista_step,
    s_fista,
)

__version__ = "0.1.0"
