"""
Typed errors raised across the toolkit.

Every error subclasses a builtin (ValueError or RuntimeError) so callers that
only know the builtin keep working.
"""
from typing import Optional, Sequence, Tuple


class TRTError(RuntimeError):
    """Base class for runtime failures of the reconstruction toolkit."""


class InvalidInputError(ValueError):
    """Arguments violate an operation's precondition."""


class IncompleteInputError(InvalidInputError):
    """A required entry (polarization subset, frame component) is missing."""

    def __init__(self, message: str, missing: Sequence = ()):
        super().__init__(message)
        self.missing = tuple(missing)


class OutOfDomainError(InvalidInputError):
    """A probe point lies outside the reconstructed box."""


class GeometryGuardError(InvalidInputError):
    """The acquisition radius violates R > sqrt(n)*r for the selected curve."""


class ContainerFormatError(InvalidInputError):
    """A grid container file is malformed or of the wrong kind."""


class DegenerateSystemError(TRTError):
    """A linear system built from view directions is (numerically) singular."""

    def __init__(self, message: str, pair: Optional[Tuple[int, int]] = None,
                 det: Optional[float] = None):
        super().__init__(message)
        self.pair = pair
        self.det = det


class ContractViolationError(TRTError):
    """The acquisition geometry does not encompass the support ball."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class TangencyError(TRTError):
    """A plane touches the curve tangentially at the requested branch."""

    def __init__(self, message: str, plane=None):
        super().__init__(message)
        self.plane = plane


class CoverageError(TRTError):
    """Too few usable intersection points on the planes through a point."""

    def __init__(self, message: str, planes: Sequence = ()):
        super().__init__(message)
        self.planes = tuple(planes)


class UnsupportedDimensionError(TRTError):
    """Requested an even-dimensional inversion."""
