"""Corridor navigation package: language commands to validated waypoints and simulated execution."""

from .control import ControllerConfig, Pose, VelocityCommand, control_step, map_to_odom
from .navigator import Navigator, NavState, NavStatus, SimConfig
from .planning import Command, Path, PlannerConfig, parse_command, parse_waypoints, plan, validate_path
from .providers import LlmEndpointConfig, LlmProvider, OracleProvider, StubProvider
from .safety import SafetyConfig
from .world import EnvironmentMap, builtin_environment
from .exceptions import (
    NavigationError,
    ConfigurationError,
    UnknownTarget,
    AmbiguousTarget,
    ParseFailure,
    ValidationError,
    AllWaypointsInvalid,
    TargetUnreachable,
    PlanningFailed,
    ProviderUnavailable,
    ProviderError,
    ReplanFailed,
)

__all__ = [
    "Navigator",
    "NavState",
    "NavStatus",
    "SimConfig",
    "Command",
    "Path",
    "PlannerConfig",
    "parse_command",
    "parse_waypoints",
    "plan",
    "validate_path",
    "LlmEndpointConfig",
    "LlmProvider",
    "OracleProvider",
    "StubProvider",
    "SafetyConfig",
    "ControllerConfig",
    "Pose",
    "VelocityCommand",
    "control_step",
    "map_to_odom",
    "EnvironmentMap",
    "builtin_environment",
    "NavigationError",
    "ConfigurationError",
    "UnknownTarget",
    "AmbiguousTarget",
    "ParseFailure",
    "ValidationError",
    "AllWaypointsInvalid",
    "TargetUnreachable",
    "PlanningFailed",
    "ProviderUnavailable",
    "ProviderError",
    "ReplanFailed",
]
__version__ = "0.1.0"
