"""
Exception hierarchy for the EBM lab.

Every error raised by the numerical modules derives from EBMError so callers
(the CLI, the HTTP routers) can map failures to exit codes / status codes in
one place.
"""

from typing import Optional

# ---------------------------------------------------------------------------
# Base
# ---------------------------------------------------------------------------

class EBMError(Exception):
    """Root of all lab errors."""


# ---------------------------------------------------------------------------
# Input validation
# ---------------------------------------------------------------------------

class InvalidParameterError(EBMError, ValueError):
    """A parameter is out of range (non-positive divisor, bad albedo order...)."""


class InvalidGeometryError(EBMError, ValueError):
    """Continent bounds fall outside (0, π) or are not ordered."""


class AmbiguousAlbedoError(EBMError, ValueError):
    """Step albedo requested exactly at its threshold temperature."""

    def __init__(self, T: float, threshold: float) -> None:
        super().__init__(f"step albedo is ambiguous at T={T!r} (threshold {threshold!r})")
        self.T = T
        self.threshold = threshold


class PoleError(EBMError, ValueError):
    """A stencil containing cot θ was evaluated at θ = 0 or θ = π."""


class InsufficientDataError(EBMError, ValueError):
    """Not enough points for the requested estimate."""


class ConfigError(EBMError):
    """Configuration file could not be parsed or validated.

    Attributes:
        problems: One ``"key: reason"`` string per offending entry.
    """

    def __init__(self, message: str, problems: Optional[list] = None) -> None:
        self.problems = list(problems or [])
        detail = message if not self.problems else message + "\n  " + "\n  ".join(self.problems)
        super().__init__(detail)


class UnresolvedReferenceError(EBMError, LookupError):
    """A solution id or initial-condition source could not be resolved."""


# ---------------------------------------------------------------------------
# Numerical failures
# ---------------------------------------------------------------------------

class InfeasibleConfigurationError(EBMError):
    """Critical latitudes are not inside the intervals their case requires."""


class NumericError(EBMError):
    """A numerical evaluation failed.

    Attributes:
        theta: Angle at which the failure happened, when known.
    """

    def __init__(self, message: str, theta: Optional[float] = None) -> None:
        if theta is not None:
            message = f"{message} (theta={theta!r})"
        super().__init__(message)
        self.theta = theta


class QuadratureError(NumericError):
    """Adaptive quadrature did not reach its tolerance.

    Attributes:
        panels: ``(lo, hi)`` of the first unresolved panels.
    """

    def __init__(self, message: str, panels: Optional[list] = None) -> None:
        super().__init__(message)
        self.panels = list(panels or [])


class DegenerateCaseError(NumericError):
    """The linear boundary-integral system of a case is singular."""

    def __init__(self, message: str, condition: float) -> None:
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class StiffnessError(NumericError):
    """The explicit integrator could not make progress."""
