"""Exception hierarchy used across the package."""

import numpy as np


class ProblinError(Exception):
    """Base class for all package errors."""


class PreconditionError(ProblinError, ValueError):
    """An input violates a documented precondition."""


class ShapeError(PreconditionError):
    """Operand shapes are incompatible."""


class SizeError(ProblinError, MemoryError):
    """Refusing to densify an operator above the size ceiling."""


class RankError(ProblinError, np.linalg.LinAlgError):
    """A matrix that must have full column rank does not.

    ``column`` holds the index of the first numerically dependent column.
    """

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class DefinitenessError(ProblinError, np.linalg.LinAlgError):
    """A matrix that must be positive (semi)definite is not."""


class GramSingularError(ProblinError, np.linalg.LinAlgError):
    """An observation Gram matrix is singular."""


class DegenerateActionError(PreconditionError):
    """An action or observation vector is zero."""


class BreakdownError(ProblinError, ArithmeticError):
    """The curvature s^T y is not safely positive."""


class AlreadyConverged(ProblinError):
    """The residual is exactly zero, so no further action is needed."""


class UnsupportedConfigurationError(ProblinError, ValueError):
    """The requested combination of options is not supported."""


class ConditioningError(ProblinError, np.linalg.LinAlgError):
    """A kernel Gram matrix is too ill-conditioned even after jitter."""


class InvalidSystemError(PreconditionError):
    """The linear system is not symmetric, or has mismatched dimensions."""


class InputFormatError(ProblinError, ValueError):
    """A file could not be parsed; ``path`` and ``offset`` locate the problem."""

    def __init__(self, message, path=None, offset=None):
        where = f"{path}" if path is not None else "<input>"
        if offset is not None:
            where += f" at byte {offset}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.offset = offset
