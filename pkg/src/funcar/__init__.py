"""Tikhonov-regularized estimation of the autocorrelation operator of ARH(1) processes."""
__version__ = "0.1.0"

from funcar.hilbert import (  # noqa: E402
    BasisSpec,
    HilbertOperator,
    HilbertVector,
    adjoint,
    apply,
    basis_eval,
    compose,
    design_matrix,
    pseudo_inverse,
    schatten_norm,
    tensor_product,
)
from funcar.arh import ArhModel, SamplePath, check_stationarity, lag_cov, simulate, stationary_cov  # noqa: E402
from funcar.estimators import (  # noqa: E402
    CovPair,
    SparseDesign,
    empirical_cov,
    empirical_lag1,
    sparse_cov_estimate,
    sparse_observe,
)
from funcar.tikhonov import (  # noqa: E402
    SourceCheck,
    TikhonovEstimate,
    choose_alpha,
    estimate_rho,
    k_alpha,
    oracle_rho_star,
    source_condition_check,
)
