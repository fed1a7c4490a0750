"""Higher-order regularization for ill-conditioned least squares, with range-based localization tools."""

from .bias_correction import SlidingWindow, batch_bias
from .error_analysis import hr_bias, residual_bounds, residual_F
from .errors import (
    DimensionError,
    HiregError,
    NotSymmetricError,
    ParameterError,
    SingularMatrixError,
    SpectralRadiusError,
)
from .localization import AnchorSet, RangeMeasurement, build_system, ill_condition_report, locate
from .regularization import Method, RegularizationPlan, build_relaxed_R, resolve_plan
from .solvers import SolveOutcome, solve, solve_hr, solve_hr_adjusted, solve_ls, solve_tikhonov, solve_tsvd
from .spectral import LinearSystem, SpectralDecomposition, eig_sym

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "DimensionError",
    "HiregError",
    "LinearSystem",
    "Method",
    "NotSymmetricError",
    "ParameterError",
    "RangeMeasurement",
    "RegularizationPlan",
    "SingularMatrixError",
    "SlidingWindow",
    "SolveOutcome",
    "SpectralDecomposition",
    "SpectralRadiusError",
    "batch_bias",
    "build_relaxed_R",
    "build_system",
    "eig_sym",
    "hr_bias",
    "ill_condition_report",
    "locate",
    "residual_F",
    "residual_bounds",
    "resolve_plan",
    "solve",
    "solve_hr",
    "solve_hr_adjusted",
    "solve_ls",
    "solve_tikhonov",
    "solve_tsvd",
]
