"""Sparse log-linear intensity models for spatial point patterns.

Fits are driven by a weighted discretization of the composite Poisson
likelihood; model selection uses either an adaptively weighted L1
penalty (reweighting plus coordinate descent) or a linearized
score-constrained L1 program solved exactly as an LP, with BIC tuning
along a penalty path.  Simulators for inhomogeneous Poisson and
Gaussian-cluster processes plus a replication harness round out the
package.
"""
from .errors import (
    ConvergenceError,
    DegenerateColumnError,
    LpError,
    NumericRangeError,
    PpselectError,
    RankDeficiencyError,
)
from .geometry import (
    Coefficients,
    CovariateField,
    ModelSpec,
    PointPattern,
    StandardizationStats,
    Window,
    design_matrix,
    design_row,
    to_original_scale,
)
from .io import read_pattern, read_raster, write_csv, write_pattern, write_raster
from .quadrature import QuadratureScheme, build_scheme, default_grid, export_scheme
from .likelihood import LikelihoodCache, loglik, mle, score, sensitivity
from .results import FitResult, PenaltyWeights
from .lasso import cd_solve, fit_al, irls_working_data, soft_threshold
from .lp import LinearProgram, LpSolution, dump_lp, solve_lp
from .dantzig import AldsProblem, build_alds_lp, fit_alds, solve_alds, verify_kkt
from .tuning import (
    GridSpec,
    LambdaPath,
    adaptive_weights,
    bic,
    lambda_max,
    select_lambda,
)
from .simulate import (
    RngSpec,
    expected_count,
    max_intensity,
    sim_poisson,
    sim_thomas,
    tune_intercept,
)
from .harness import (
    StudyConfig,
    StudyResult,
    build_model,
    make_fields,
    rmse,
    run_study,
    tpr_fpr,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
