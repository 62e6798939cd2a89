"""Exception hierarchy shared across the package.

Model errors (non-SPD metric, focalization, estimator disagreement) are kept
distinct from usage errors so the CLI can map them to its exit-code contract.
"""


class BmcdError(Exception):
    """Base class for all package errors."""


class ExpressionError(BmcdError):
    """Syntax or semantic error in a metric/weight expression.

    ``offset`` is the byte offset of the offending token in the source text.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class EvaluationDomainError(BmcdError):
    """Evaluation hit a domain violation (log of non-positive, sqrt of negative)."""

    def __init__(self, message, node=None):
        if node is not None:
            message = f"{message} in subexpression '{node}'"
        super().__init__(message)
        self.node = node


class ModelError(BmcdError):
    """The geometric model is invalid at a queried point (e.g. metric not SPD)."""


class DomainExitError(ModelError):
    """A trajectory left the chart domain; ``exit_time`` is the first offending time."""

    def __init__(self, message, exit_time=None):
        if exit_time is not None:
            message = f"{message} (exit time {exit_time:.6g})"
        super().__init__(message)
        self.exit_time = exit_time


class ConvergenceError(ModelError):
    """An iterative solver failed to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class FocalizationError(ModelError):
    """det J(t) lost positivity along a Jacobi field; carries the crossing time."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (first crossing near t = {time:.6g})"
        super().__init__(message)
        self.time = time


class ConventionError(BmcdError):
    """A dimensional-parameter convention was violated (N < n, or N = n with gradient weight)."""


class EstimatorError(ModelError):
    """Two independent measure estimates disagree beyond tolerance."""


class CoveringError(ModelError):
    """The raster covering criterion cannot be satisfied within the budget."""


class PreconditionError(BmcdError):
    """A pipeline precondition on the inputs fails (no violating direction)."""
