"""Geometric model of the corridor environments: membership queries and LIDAR raycasting."""

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .control import Point, Pose
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

BUILTIN_ENVIRONMENTS = ("env_a", "env_b", "env_c")
DEFAULT_SAFE_MARGIN = 0.5
DEFAULT_LIDAR_BEAMS = 360
DEFAULT_LIDAR_MAX_RANGE = 3.5
_MIN_RANGE = 1e-6


@dataclass(frozen=True)
class Corridor:
    name: str
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def contains(self, p: Point, margin: float = 0.0) -> bool:
        return (self.x_min + margin <= p[0] <= self.x_max - margin
                and self.y_min + margin <= p[1] <= self.y_max - margin)

    def clamp(self, p: Point, margin: float) -> Point:
        """Project a point onto the margin-shrunk interior."""
        return (min(max(p[0], self.x_min + margin), self.x_max - margin),
                min(max(p[1], self.y_min + margin), self.y_max - margin))


@dataclass(frozen=True)
class TargetObject:
    name: str
    position: Point
    corridor: str


@dataclass(frozen=True)
class Junction:
    position: Point
    connects: Tuple[str, str]


@dataclass(frozen=True)
class Segment:
    start: Point
    end: Point


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def clearance(self, p: Point) -> float:
        """Distance from ``p`` to the circle boundary (negative inside)."""
        return math.hypot(p[0] - self.center[0], p[1] - self.center[1]) - self.radius


@dataclass
class ScanData:
    ranges: np.ndarray
    bearings: np.ndarray
    stamp: float = 0.0
    max_range: float = DEFAULT_LIDAR_MAX_RANGE

    def __post_init__(self) -> None:
        if len(self.ranges) != len(self.bearings):
            raise ValueError("ranges and bearings must have equal lengths")


@dataclass
class EnvironmentMap:
    name: str
    corridors: List[Corridor]
    objects: List[TargetObject]
    junctions: List[Junction]
    walls: List[Segment]
    safe_margin: float = DEFAULT_SAFE_MARGIN
    start_pose: Pose = field(default_factory=lambda: Pose(0.0, 0.0, 0.0))
    dynamic_obstacles: List[Circle] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.safe_margin <= 0:
            raise ConfigurationError(f"{self.name}: safe_margin must be positive")
        names = [c.name for c in self.corridors]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"{self.name}: duplicate corridor names")
        for c in self.corridors:
            if not (c.x_min < c.x_max and c.y_min < c.y_max):
                raise ConfigurationError(f"{self.name}: corridor {c.name} has empty extent")
            if (c.x_max - c.x_min) <= 2 * self.safe_margin or (c.y_max - c.y_min) <= 2 * self.safe_margin:
                raise ConfigurationError(f"{self.name}: corridor {c.name} is narrower than twice the margin")
        object_names = [o.name for o in self.objects]
        if len(set(object_names)) != len(object_names):
            raise ConfigurationError(f"{self.name}: duplicate object names")
        for o in self.objects:
            if o.corridor not in names:
                raise ConfigurationError(f"{self.name}: object {o.name} references unknown corridor {o.corridor}")
        for j in self.junctions:
            for ref in j.connects:
                if ref not in names:
                    raise ConfigurationError(f"{self.name}: junction references unknown corridor {ref}")

    def corridor(self, name: str) -> Corridor:
        for c in self.corridors:
            if c.name == name:
                return c
        raise ConfigurationError(f"{self.name}: no corridor named {name}")

    def object(self, name: str) -> TargetObject:
        for o in self.objects:
            if o.name == name:
                return o
        raise ConfigurationError(f"{self.name}: no object named {name}")

    def margin_corridors(self, p: Point) -> List[Corridor]:
        """Corridors whose margin-shrunk interior holds ``p``, in declaration order."""
        return [c for c in self.corridors if c.contains(p, self.safe_margin)]

    def inject_obstacle(self, obstacle: Circle) -> None:
        logger.info(f"Injecting obstacle at {obstacle.center} r={obstacle.radius}")
        self.dynamic_obstacles.append(obstacle)

    def remove_obstacle(self, obstacle: Circle) -> None:
        if obstacle in self.dynamic_obstacles:
            self.dynamic_obstacles.remove(obstacle)

    def clear_obstacles(self) -> None:
        self.dynamic_obstacles.clear()

    def bounds(self) -> Tuple[float, float, float, float]:
        return (min(c.x_min for c in self.corridors), max(c.x_max for c in self.corridors),
                min(c.y_min for c in self.corridors), max(c.y_max for c in self.corridors))


def containing_corridor(env: EnvironmentMap, p: Point, tolerance: float = 0.0) -> Optional[str]:
    """First corridor (declaration order) whose closed rectangle contains ``p``."""
    for c in env.corridors:
        if c.contains(p, -tolerance):
            return c.name
    return None


def within_margin(env: EnvironmentMap, p: Point) -> bool:
    return any(c.contains(p, env.safe_margin) for c in env.corridors)


def beam_bearings(beam_count: int) -> np.ndarray:
    """Evenly spaced body-frame bearings covering [-pi, pi)."""
    return -math.pi + (2.0 * math.pi / beam_count) * np.arange(beam_count)


def cast_scan(
    env: EnvironmentMap,
    pose: Pose,
    beam_count: int = DEFAULT_LIDAR_BEAMS,
    max_range: float = DEFAULT_LIDAR_MAX_RANGE,
    stamp: float = 0.0,
) -> ScanData:
    """Synthesize a LIDAR sweep against walls and dynamic obstacles."""
    if beam_count < 1:
        raise ValueError("beam_count must be >= 1")
    if max_range <= 0:
        raise ValueError("max_range must be positive")

    bearings = beam_bearings(beam_count)
    angles = bearings + pose.theta
    dirs = np.column_stack((np.cos(angles), np.sin(angles)))  # (N, 2)
    origin = np.array([pose.x, pose.y])
    ranges = np.full(beam_count, max_range, dtype=float)

    if env.walls:
        starts = np.array([w.start for w in env.walls], dtype=float)  # (M, 2)
        ends = np.array([w.end for w in env.walls], dtype=float)
        edge = ends - starts
        rel = starts - origin
        # ray o + t*d meets segment p + u*e where cross(d, e) != 0
        denom = dirs[:, 0:1] * edge[None, :, 1] - dirs[:, 1:2] * edge[None, :, 0]  # (N, M)
        t_num = rel[None, :, 0] * edge[None, :, 1] - rel[None, :, 1] * edge[None, :, 0]
        u_num = rel[None, :, 0] * dirs[:, 1:2] - rel[None, :, 1] * dirs[:, 0:1]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t_num / denom
            u = u_num / denom
        hit = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
        t = np.where(hit, t, np.inf)
        ranges = np.minimum(ranges, t.min(axis=1))

    for obstacle in env.dynamic_obstacles:
        oc = origin - np.asarray(obstacle.center, dtype=float)
        c = float(oc @ oc) - obstacle.radius ** 2
        b = dirs @ oc
        if c <= 0.0:
            # origin inside the obstacle: every beam is blocked immediately
            ranges[:] = _MIN_RANGE
            continue
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            t = -b - np.sqrt(disc)
        t = np.where((disc >= 0.0) & (t >= 0.0), t, np.inf)
        ranges = np.minimum(ranges, t)

    ranges = np.clip(ranges, _MIN_RANGE, max_range)
    return ScanData(ranges=ranges, bearings=bearings, stamp=stamp, max_range=max_range)


def _walls_from_polygon(vertices: Sequence[Sequence[float]]) -> List[Segment]:
    pts = [tuple(map(float, v)) for v in vertices]
    return [Segment(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]


def environment_from_dict(data: dict[str, Any]) -> EnvironmentMap:
    """Build an EnvironmentMap from the JSON environment document."""
    try:
        corridors = [
            Corridor(c["name"], float(c["x_min"]), float(c["x_max"]), float(c["y_min"]), float(c["y_max"]))
            for c in data["corridors"]
        ]
        objects = [
            TargetObject(o["name"], (float(o["x"]), float(o["y"])), o["corridor"])
            for o in data["objects"]
        ]
        junctions = [
            Junction((float(j["x"]), float(j["y"])), (j["connects"][0], j["connects"][1]))
            for j in data.get("junctions", [])
        ]
        walls_doc = data["walls"]
        if isinstance(walls_doc, dict):
            walls = _walls_from_polygon(walls_doc["polygon"])
        else:
            walls = [Segment((float(w[0]), float(w[1])), (float(w[2]), float(w[3]))) for w in walls_doc]
        sp = data.get("start_pose", {"x": 0.0, "y": 0.0, "theta": 0.0})
        return EnvironmentMap(
            name=data["name"],
            corridors=corridors,
            objects=objects,
            junctions=junctions,
            walls=walls,
            safe_margin=float(data.get("safe_margin", DEFAULT_SAFE_MARGIN)),
            start_pose=Pose(float(sp["x"]), float(sp["y"]), float(sp.get("theta", 0.0))),
        )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ConfigurationError(f"Malformed environment document: {e}") from e


def load_environment(path: Union[str, Path]) -> EnvironmentMap:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigurationError(f"Environment file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Environment file {path} is not valid JSON: {e}") from e
    return environment_from_dict(data)


def builtin_environment(name: str) -> EnvironmentMap:
    if name not in BUILTIN_ENVIRONMENTS:
        raise ConfigurationError(f"Unknown environment '{name}', expected one of {BUILTIN_ENVIRONMENTS}")
    text = resources.files("corridor_nav").joinpath("data", "environments", f"{name}.json").read_text(encoding="utf-8")
    return environment_from_dict(json.loads(text))


def resolve_environment(name_or_path: str) -> EnvironmentMap:
    """Built-in name or path to a custom environment file."""
    if name_or_path in BUILTIN_ENVIRONMENTS:
        return builtin_environment(name_or_path)
    return load_environment(name_or_path)


def segment_point_distance(a: Point, b: Point, p: Point) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    s = ((p[0] - ax) * dx + (p[1] - ay) * dy) / length_sq
    s = max(0.0, min(1.0, s))
    return math.hypot(p[0] - (ax + s * dx), p[1] - (ay + s * dy))


def polyline_length(points: Iterable[Point]) -> float:
    pts = list(points)
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:]))
