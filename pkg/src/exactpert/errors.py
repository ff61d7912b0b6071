"""Exception hierarchy.

Every error belongs to one of two families so the command line can map
failures onto exit codes: a :class:`DomainError` means the input violates a
hypothesis of the method (exit code 2), a :class:`ConvergenceError` means a
numeric procedure failed to reach its tolerance (exit code 3).
"""

from __future__ import annotations


class ExactPertError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(ExactPertError, ValueError):
    """Input outside the region where the method applies."""

    exit_code = 2


class ConvergenceError(ExactPertError, ArithmeticError):
    """A numeric procedure did not reach its tolerance."""

    exit_code = 3


class DimensionError(DomainError):
    """Shapes, orders or component counts do not match."""


class ParseError(DomainError):
    """A problem file violates the schema."""


class SingularJacobianError(DomainError):
    """The leading-order Jacobian is numerically singular."""


class InconsistentInputError(DomainError):
    """Supplied data contradict each other (e.g. f_0 is not a root)."""


class ContinuationError(DomainError):
    """A singularity of the Borel transform sits on or near the ray."""


class GapError(DomainError):
    """Eigenvalue groups are closer than the requested spectral gap."""


class DefectiveInputError(DomainError):
    """The leading matrix is not diagonalizable and no exact transform was given."""


class DiscriminantError(DomainError):
    """Leading eigenvalues coalesce, so the scalar pipeline does not apply."""


class NoSolutionError(ConvergenceError):
    """Newton iteration for the leading-order equation did not converge."""


class DivergenceError(ConvergenceError):
    """Fixed-point iteration did not converge within the iteration budget."""


class ResolutionError(ConvergenceError):
    """The grid is too coarse (or too long) for the requested accuracy."""


class ConditioningError(ConvergenceError):
    """A linear solve is too ill-conditioned to trust."""


class InternalConsistencyError(ConvergenceError):
    """A constructed object fails its own defining identity."""


class OracleFailure(ConvergenceError):
    """A reference computation failed; the comparison is inconclusive."""
