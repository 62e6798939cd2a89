"""Numerical Brunn-Minkowski / curvature-dimension verification toolkit."""

from .errors import (
    BmcdError,
    ConventionError,
    ConvergenceError,
    CoveringError,
    DomainExitError,
    EstimatorError,
    EvaluationDomainError,
    ExpressionError,
    FocalizationError,
    ModelError,
)

__all__ = [
    "BmcdError",
    "ConventionError",
    "ConvergenceError",
    "CoveringError",
    "DomainExitError",
    "EstimatorError",
    "EvaluationDomainError",
    "ExpressionError",
    "FocalizationError",
    "ModelError",
]

__version__ = "0.1.0"
