"""Frame transformation and the proportional waypoint-tracking controller."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

from .exceptions import ConfigurationError, DegenerateBearing, FrameMismatchError

Point = Tuple[float, float]

TWO_PI = 2.0 * math.pi
_COINCIDENT_EPS = 1e-12


def normalize_angle(angle: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    wrapped = (angle + math.pi) % TWO_PI - math.pi
    # float modulo can round up to exactly 2*pi for tiny negative inputs
    if wrapped >= math.pi:
        wrapped -= TWO_PI
    if wrapped < -math.pi:
        wrapped = -math.pi
    return wrapped


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def position(self) -> Point:
        return (self.x, self.y)


class Frame(str, Enum):
    MAP = "map"
    ODOM = "odom"


@dataclass(frozen=True)
class FramedPoint:
    x: float
    y: float
    frame: Frame

    @property
    def position(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class VelocityCommand:
    linear: float = 0.0
    angular: float = 0.0


STOP = VelocityCommand(0.0, 0.0)


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and limits of the proportional tracker.

    Defaults follow the simulated robot configuration: 0.4 m/s, 2.0 rad/s,
    0.1 m reach tolerance and 0.087 rad alignment tolerance. Forward motion is
    suppressed while |alpha| exceeds ``turn_in_place_factor * angle_threshold``.
    """
    k_linear: float = 0.8
    k_angular: float = 2.5
    max_linear: float = 0.4
    max_angular: float = 2.0
    distance_threshold: float = 0.1
    angle_threshold: float = 0.087
    turn_in_place_factor: float = 4.0

    def __post_init__(self) -> None:
        for name in ("k_linear", "k_angular", "max_linear", "max_angular",
                     "distance_threshold", "angle_threshold", "turn_in_place_factor"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"ControllerConfig.{name} must be positive")

    @property
    def turn_in_place_angle(self) -> float:
        return self.angle_threshold * self.turn_in_place_factor


@dataclass(frozen=True)
class ControlOutput:
    command: VelocityCommand
    reached: bool
    distance: float
    alpha: float


def map_to_odom(p: FramedPoint, robot_map_pose: Pose) -> FramedPoint:
    """Rotate a map-frame point by the robot heading, then translate by its position."""
    if p.frame is not Frame.MAP:
        raise FrameMismatchError(f"map_to_odom expects a map-frame point, got {p.frame.value}")
    c, s = math.cos(robot_map_pose.theta), math.sin(robot_map_pose.theta)
    return FramedPoint(
        x=c * p.x - s * p.y + robot_map_pose.x,
        y=s * p.x + c * p.y + robot_map_pose.y,
        frame=Frame.ODOM,
    )


def odom_to_map(p: FramedPoint, robot_map_pose: Pose) -> FramedPoint:
    """Exact inverse of map_to_odom for the same anchor pose."""
    if p.frame is not Frame.ODOM:
        raise FrameMismatchError(f"odom_to_map expects an odom-frame point, got {p.frame.value}")
    c, s = math.cos(robot_map_pose.theta), math.sin(robot_map_pose.theta)
    dx, dy = p.x - robot_map_pose.x, p.y - robot_map_pose.y
    return FramedPoint(x=c * dx + s * dy, y=-s * dx + c * dy, frame=Frame.MAP)


def pose_to_odom(pose: Pose, anchor: Pose) -> Pose:
    """Express a map-frame pose in the odom frame anchored at ``anchor``."""
    p = map_to_odom(FramedPoint(pose.x, pose.y, Frame.MAP), anchor)
    return Pose(p.x, p.y, pose.theta + anchor.theta)


def distance_to(p: Point, q: Point) -> float:
    return math.hypot(q[0] - p[0], q[1] - p[1])


def angular_error(pose: Pose, target: Point) -> float:
    dx, dy = target[0] - pose.x, target[1] - pose.y
    if abs(dx) <= _COINCIDENT_EPS and abs(dy) <= _COINCIDENT_EPS:
        raise DegenerateBearing(f"Target {target} coincides with robot position")
    return normalize_angle(math.atan2(dy, dx) - pose.theta)


def _clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


def control_step(pose: Pose, target: Point, cfg: ControllerConfig) -> ControlOutput:
    """One tick of the proportional law V = k_linear*d, w = k_angular*alpha (both clamped)."""
    d = distance_to(pose.position, target)
    if d <= cfg.distance_threshold:
        return ControlOutput(STOP, True, d, 0.0)
    try:
        alpha = angular_error(pose, target)
    except DegenerateBearing:
        return ControlOutput(STOP, True, d, 0.0)

    angular = _clamp(cfg.k_angular * alpha, -cfg.max_angular, cfg.max_angular)
    if abs(alpha) > cfg.turn_in_place_angle:
        linear = 0.0
    else:
        linear = _clamp(cfg.k_linear * d, 0.0, cfg.max_linear)
    return ControlOutput(VelocityCommand(linear, angular), False, d, alpha)
