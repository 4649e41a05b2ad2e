"""Normalized Wald change-point tests for FARIMA and AR models."""

from .farima import (
    DomainError,
    FarimaParams,
    FilterCoeffs,
    ParamSpace,
    SeriesBuffer,
    frac_diff_coeffs,
    inverse_frac_coeffs,
    log_deriv_coeffs,
    residuals,
    score_panel,
    simulate_farima,
)
from .models import (
    FitResult,
    ModelSpec,
    NonConvergence,
    RangeTooShort,
    ar_model,
    farima_model,
    fit,
)
from .panel import ScorePanel
from .scan import (
    DegenerateInformation,
    NormConstants,
    SandwichEstimates,
    ScanDegenerate,
    ScanResult,
    critical_value,
    norm_constants,
    p_value,
    scan,
    wald_at,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateInformation",
    "DomainError",
    "FarimaParams",
    "FilterCoeffs",
    "FitResult",
    "ModelSpec",
    "NonConvergence",
    "NormConstants",
    "ParamSpace",
    "RangeTooShort",
    "SandwichEstimates",
    "ScanDegenerate",
    "ScanResult",
    "ScorePanel",
    "SeriesBuffer",
    "ar_model",
    "critical_value",
    "farima_model",
    "fit",
    "frac_diff_coeffs",
    "inverse_frac_coeffs",
    "log_deriv_coeffs",
    "norm_constants",
    "p_value",
    "residuals",
    "scan",
    "score_panel",
    "simulate_farima",
    "wald_at",
]
