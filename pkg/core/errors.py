"""Exception hierarchy for network construction and numerical failures.

Every error derives from ``ValueError`` so callers that only guard against bad
input keep working. The command line maps the families to exit codes.
"""

from __future__ import annotations

from typing import Optional


class FluctnetError(ValueError):
    """Base class for all library errors."""


class ModelError(FluctnetError):
    """The network description is not a valid harmonic network."""


class AssumptionError(ModelError):
    """A standing assumption (controllability, structural identities) fails."""


class DomainError(FluctnetError):
    """An argument lies outside the admissible range (alpha, time, grid)."""


class NumericError(FluctnetError):
    """A numerical kernel could not produce a trustworthy result."""


class SingularityError(NumericError):
    """Linear system is singular within tolerance."""


class SpectralGapError(NumericError):
    """Eigenvalues on the imaginary axis where a spectral gap is required."""


class DegenerateSubspaceError(NumericError):
    """Invariant subspace is not the graph of a matrix."""

    def __init__(self, message: str, condition: Optional[float] = None):
        super().__init__(message)
        self.condition = condition


class AccuracyError(NumericError):
    """An iterative approximation did not reach the requested accuracy."""

    def __init__(self, message: str, error_bound: Optional[float] = None):
        super().__init__(message)
        self.error_bound = error_bound


class ResolutionError(NumericError):
    """A search grid was too coarse to bracket the requested feature."""
