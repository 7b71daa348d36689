"""Structure learning for stochastic differential equations.

Simulation of linear and mass-spring SDEs, random interaction ensembles,
spectral lower bounds on the observation time, l1-regularized drift
recovery, and a Monte-Carlo check of the path mutual-information identity.
"""
from .ensembles import (
    DenseEnsembleSpec,
    NetworkSpec,
    SparseEnsembleSpec,
    mass_spring_network,
    sample_ensemble,
)
from .estimator import (
    RecoveryResult,
    build_regression,
    estimate_sample_complexity,
    l1_drift_estimate,
    recover_signed_support,
)
from .kernels import BACKEND
from .sde import (
    DivergenceError,
    InteractionMatrix,
    LinearDrift,
    MassSpring,
    Trajectory,
    simulate,
    stationary_covariance,
)
from .spectral import (
    BoundReport,
    lower_bound_dense,
    lower_bound_nonlinear,
    lower_bound_sparse,
    q_dense,
    q_sparse,
    stieltjes_G,
)

__version__ = "0.1.0"
