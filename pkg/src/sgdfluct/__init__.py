"""Simulator and verifier for the long-term fluctuations of stochastic
gradient descent on convex objectives.

Subpackages cover dense symmetric linear algebra, concrete stochastic
objectives, the SGD recursion, trajectory rescaling, exact sampling of the
limiting time-inhomogeneous diffusion, closed-form asymptotic covariances,
and Monte Carlo verification suites tying the pieces together.
"""

__version__ = "0.1.0"

from sgdfluct.linalg import (
    EigenDecomposition,
    cholesky,
    eigh_symmetric,
    frobenius_norm,
    operator_norm,
    sym_sqrt,
)
from sgdfluct.models import ModelSpec, ProblemModel, build_model
from sgdfluct.sgd import (
    DivergenceError,
    ReplicationResult,
    StepSchedule,
    Trajectory,
    run_replications,
    run_sgd,
)
from sgdfluct.rescaling import RescaledPath, rescale
from sgdfluct.diffusion import (
    DiffusionPath,
    LimitParams,
    covariance_kernel,
    cross_covariance,
    marginal_covariance,
    sample_euler,
    sample_exact,
    sample_exact_paths,
    sup_norm_statistic,
)
from sgdfluct.asymptotics import (
    CovarianceReport,
    brownian_sup_bounds,
    compare_variances,
    delta_erm,
    diffusion_matrix,
    drift,
    sigma_limit,
    sup_bound,
    transition_moments,
)
from sgdfluct.verify import (
    VerificationReport,
    clt_check,
    coefficient_convergence_check,
    consistency_check,
    fdd_check,
    sup_bound_check,
    tightness_check,
)

__all__ = [
    "EigenDecomposition",
    "cholesky",
    "eigh_symmetric",
    "frobenius_norm",
    "operator_norm",
    "sym_sqrt",
    "ModelSpec",
    "ProblemModel",
    "build_model",
    "DivergenceError",
    "ReplicationResult",
    "StepSchedule",
    "Trajectory",
    "run_replications",
    "run_sgd",
    "RescaledPath",
    "rescale",
    "DiffusionPath",
    "LimitParams",
    "covariance_kernel",
    "cross_covariance",
    "marginal_covariance",
    "sample_euler",
    "sample_exact",
    "sample_exact_paths",
    "sup_norm_statistic",
    "CovarianceReport",
    "brownian_sup_bounds",
    "compare_variances",
    "delta_erm",
    "diffusion_matrix",
    "drift",
    "sigma_limit",
    "sup_bound",
    "transition_moments",
    "VerificationReport",
    "clt_check",
    "coefficient_convergence_check",
    "consistency_check",
    "fdd_check",
    "sup_bound_check",
    "tightness_check",
]
