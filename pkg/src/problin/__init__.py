"""Probabilistic linear solvers with calibrated uncertainty."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .calibration import (
    NoiseFloor,
    RayleighGP,
    RayleighSample,
    SpectrumMean,
    compute_phi_psi,
    fit_rayleigh_gp,
    rayleigh_quotients,
    w_statistic,
)
from .distributions import (
    GaussianVector,
    MatrixNormal,
    SymmetricMatrixNormal,
    logpdf_symmetric,
    sample_symmetric,
    solution_belief,
)
from .inference import (
    ObservationBlock,
    posterior_asymmetric,
    posterior_symmetric,
    posterior_symmetric_inverse,
    update_one,
)
from .linalg import (
    DenseOperator,
    FunctionOperator,
    LinearOperator,
    LowRankUpdate,
    OrthogonalProjection,
    ScaledIdentity,
    aslinearoperator,
    box_apply,
    cholesky_rank1,
    kron_apply,
    orthogonal_projection,
    rank2_as_two_rank1,
    smat,
    svec,
    sym_kron_apply,
)
from .priors import (
    PriorSpec,
    covariance_class_WA,
    covariance_class_WH,
    precondition,
    prior_from_guess,
)
from .solver import SolverConfig, SolverResult, solve

__all__ = [name for name in dir() if not name.startswith("_")]
