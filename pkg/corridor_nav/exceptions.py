"""Custom exceptions for corridor_nav package."""

from typing import Any, Optional, Sequence


class NavigationError(Exception):
    """Base exception for corridor navigation errors."""
    pass


class ConfigurationError(NavigationError):
    """Raised when an environment, scenario or config value is invalid."""
    pass


class TargetResolutionError(NavigationError):
    """Base for command-to-target resolution failures."""

    def __init__(self, message: str, candidates: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.candidates = list(candidates)


class UnknownTarget(TargetResolutionError):
    """Raised when a command names no object of the active environment."""
    pass


class AmbiguousTarget(TargetResolutionError):
    """Raised when a command matches more than one object."""
    pass


class ParseFailure(NavigationError):
    """Raised when provider text holds no usable waypoint array."""
    pass


class ValidationError(NavigationError):
    """Base for waypoint validation failures; carries the validation report."""

    def __init__(self, message: str, report: Optional[Any] = None) -> None:
        super().__init__(message)
        self.report = report


class AllWaypointsInvalid(ValidationError):
    """Raised when no waypoint survives margin and spacing filtering."""
    pass


class TargetUnreachable(ValidationError):
    """Raised when the final point cannot be brought within tolerance of the target."""
    pass


class PlanningFailed(NavigationError):
    """Raised when every generation attempt of a planning call failed."""

    def __init__(self, message: str, stats: Optional[Any] = None, reasons: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.stats = stats
        self.reasons = list(reasons)


class ProviderUnavailable(NavigationError):
    """Raised when the waypoint provider cannot be reached or times out."""
    pass


class ProviderError(NavigationError):
    """Raised when the provider answers with a non-success HTTP status."""

    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"Provider returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class ReplanFailed(NavigationError):
    """Raised when no obstacle-clearing path could be produced."""

    def __init__(self, message: str, stats: Optional[Any] = None) -> None:
        super().__init__(message)
        self.stats = stats


class ReplanPolicyError(NavigationError):
    """Raised when a replan attempt is recorded while the policy forbids it."""
    pass


class DegenerateBearing(NavigationError):
    """Raised when the bearing to a target coinciding with the robot is requested."""
    pass


class FrameMismatchError(NavigationError):
    """Raised when a point tagged with the wrong frame is transformed."""
    pass


class IllegalTransition(NavigationError):
    """Raised when the navigator attempts a transition outside the legal set."""
    pass
