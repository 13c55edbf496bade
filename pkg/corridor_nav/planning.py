"""Natural-language command to validated waypoint path.

Covers command parsing, prompt construction, waypoint JSON parsing, corridor
margin / tolerance validation, the deterministic geometric planner and the
bounded regenerate loop that drives any waypoint provider.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from string import Template
from typing import TYPE_CHECKING, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .control import Point, Pose, distance_to
from .exceptions import (
    AllWaypointsInvalid,
    AmbiguousTarget,
    ConfigurationError,
    ParseFailure,
    PlanningFailed,
    ProviderError,
    ProviderUnavailable,
    TargetUnreachable,
    UnknownTarget,
    ValidationError,
)
from .world import (
    Circle,
    Corridor,
    EnvironmentMap,
    TargetObject,
    polyline_length,
    segment_point_distance,
    within_margin,
)

if TYPE_CHECKING:
    from .providers import WaypointProvider

logger = logging.getLogger(__name__)

SPACING_EPS = 1e-9
DETOUR_BUFFER = 0.15
DEFAULT_WAYPOINT_LIMITS = {"env_a": 4, "env_b": 5, "env_c": 6}
MAX_RESPONSE_CHARS = 65536
MAX_ARRAY_CANDIDATES = 64


@dataclass(frozen=True)
class PlannerConfig:
    min_spacing: float = 0.7
    tolerance_t: float = 0.05
    max_waypoints: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_WAYPOINT_LIMITS))
    default_max_waypoints: int = 6
    max_parse_retries: int = 3
    provider_timeout: float = 60.0
    max_response_chars: int = MAX_RESPONSE_CHARS

    def __post_init__(self) -> None:
        for name in ("min_spacing", "tolerance_t", "default_max_waypoints",
                     "max_parse_retries", "provider_timeout", "max_response_chars"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"PlannerConfig.{name} must be positive")
        if any(v <= 0 for v in self.max_waypoints.values()):
            raise ConfigurationError("PlannerConfig.max_waypoints entries must be positive")
        if self.tolerance_t >= self.min_spacing:
            raise ConfigurationError("PlannerConfig.tolerance_t must be smaller than min_spacing")

    def waypoint_limit(self, environment: str) -> int:
        return int(self.max_waypoints.get(environment, self.default_max_waypoints))


@dataclass(frozen=True)
class Command:
    raw_text: str
    target_name: str
    issued_at: float = 0.0


@dataclass(frozen=True)
class PlanningRequest:
    """Structured planning context; text providers ignore it, the oracle consumes it."""
    env: EnvironmentMap
    pose: Pose
    target: TargetObject
    cfg: PlannerConfig
    obstacles: Tuple[Circle, ...] = ()
    clearance: float = 0.0


@dataclass(frozen=True)
class PromptPair:
    system_prompt: str
    user_prompt: str
    request: Optional[PlanningRequest] = field(default=None, compare=False)

    def regenerate(self, attempt: int, reasons: Sequence[str]) -> "PromptPair":
        feedback = _render("regenerate.txt", attempt=attempt,
                           reasons="\n".join(f"- {r}" for r in reasons))
        return replace(self, user_prompt=f"{self.user_prompt}\n\n{feedback}")


@dataclass(frozen=True)
class RejectedPoint:
    index: int
    point: Point
    reason: str


@dataclass
class ValidationReport:
    rejected: List[RejectedPoint] = field(default_factory=list)
    final_distance: Optional[float] = None
    appended_target: bool = False

    def summary(self) -> str:
        lines = [f"waypoint {r.index} ({_num(r.point[0])}, {_num(r.point[1])}): {r.reason}"
                 for r in self.rejected]
        if self.final_distance is not None:
            lines.append(f"final waypoint is {_num(self.final_distance)} m from the target")
        return "; ".join(lines)


@dataclass(frozen=True)
class Path:
    waypoints: Tuple[Point, ...]
    provider: str
    validated: bool
    target: TargetObject
    report: Optional[ValidationReport] = field(default=None, compare=False)

    def length(self, start: Optional[Point] = None) -> float:
        pts = ([start] if start is not None else []) + list(self.waypoints)
        return polyline_length(pts)


@dataclass
class PlanningStats:
    attempts: int = 0
    successes: int = 0
    planning_time: float = 0.0
    reasons: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Command parsing

_ROOM_RE = re.compile(
    r"\b(?:room[\s\-_]*(?:number)?(?:[\s\-_]*plate)?|rnp|plate)\s*(?:no\.?|number|#)?\s*[\-#]?\s*(\d{3})\b",
    re.IGNORECASE,
)
_BARE_NUMBER_RE = re.compile(r"\b(\d{3})\b")
_NUMBER_RE = re.compile(r"\b\d+\b")
_PLATE_PREFIX = "Room-number-plate-"


def _normalize(text: str) -> str:
    text = text.lower()
    text = re.sub(r"[\-_]+", " ", text)
    text = re.sub(r"[^a-z0-9 ]+", " ", text)
    text = re.sub(r"\b0+(\d)", r"\1", text)
    return " ".join(text.split())


def _base_name(normalized: str) -> str:
    return re.sub(r"(?:\s\d+)+$", "", normalized)


def _contains_phrase(haystack: str, phrase: str) -> bool:
    return re.search(rf"(?<![a-z0-9]){re.escape(phrase)}(?![a-z0-9])", haystack) is not None


def parse_command(raw: str, env: EnvironmentMap, issued_at: Optional[float] = None) -> Command:
    """Resolve the target object named by a free-text command."""
    if not raw or not raw.strip():
        raise UnknownTarget("Empty command", candidates=[o.name for o in env.objects])
    stamp = time.time() if issued_at is None else issued_at
    plates = {o.name[len(_PLATE_PREFIX):]: o.name for o in env.objects if o.name.startswith(_PLATE_PREFIX)}

    match = _ROOM_RE.search(raw)
    if match:
        number = match.group(1)
        if number in plates:
            return Command(raw, plates[number], stamp)
        raise UnknownTarget(f"No room number plate {number} in {env.name}", candidates=sorted(plates.values()))

    text = _normalize(raw)
    named = [o for o in env.objects if not o.name.startswith(_PLATE_PREFIX)]
    exact = [o.name for o in named if _contains_phrase(text, _normalize(o.name))]
    if len(exact) == 1:
        return Command(raw, exact[0], stamp)
    if len(exact) > 1:
        raise AmbiguousTarget(f"Command '{raw}' matches several objects", candidates=exact)

    loose = [o.name for o in named if _contains_phrase(text, _base_name(_normalize(o.name)))]
    numbered = [name for name in loose if _base_name(_normalize(name)) != _normalize(name)]
    if loose and len(numbered) == len(loose) and _NUMBER_RE.search(text):
        # "window 3" with only windows 1 and 2: the number picks nothing
        raise UnknownTarget(f"Command '{raw}' names a number no object carries", candidates=loose)
    if len(loose) == 1:
        return Command(raw, loose[0], stamp)
    if len(loose) > 1:
        raise AmbiguousTarget(f"Command '{raw}' matches several objects", candidates=loose)

    bare = _BARE_NUMBER_RE.search(raw)
    if bare and bare.group(1) in plates:
        return Command(raw, plates[bare.group(1)], stamp)
    raise UnknownTarget(f"No known object in command '{raw}'", candidates=[o.name for o in env.objects])


# ---------------------------------------------------------------------------
# Prompts

@lru_cache(maxsize=None)
def _template(name: str) -> Template:
    text = resources.files("corridor_nav").joinpath("data", "prompts", name).read_text(encoding="utf-8")
    return Template(text)


def _render(name: str, **values: object) -> str:
    return _template(name).substitute(**values).rstrip("\n")


def _num(value: float) -> str:
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def build_prompts(
    env: EnvironmentMap,
    pose: Pose,
    target: TargetObject,
    cfg: PlannerConfig,
    command_text: Optional[str] = None,
    obstacles: Sequence[Circle] = (),
    clearance: float = 0.0,
) -> PromptPair:
    corridors = "\n".join(
        f"- {c.name}: x from {_num(c.x_min)} to {_num(c.x_max)}, y from {_num(c.y_min)} to {_num(c.y_max)}"
        for c in env.corridors
    )
    junctions = "\n".join(
        f"- ({_num(j.position[0])}, {_num(j.position[1])}) connecting {j.connects[0]} and {j.connects[1]}"
        for j in env.junctions
    ) or "- none (single corridor)"
    margin = _num(env.safe_margin)
    pose_values = dict(pose_x=_num(pose.x), pose_y=_num(pose.y), pose_theta=_num(pose.theta))
    system_prompt = _render("system.txt", environment=env.name, corridors=corridors,
                            junctions=junctions, safe_margin=margin, **pose_values)
    user_prompt = _render(
        "user.txt",
        command=command_text if command_text is not None else f"go to {target.name}",
        target=target.name,
        target_x=_num(target.position[0]),
        target_y=_num(target.position[1]),
        max_waypoints=cfg.waypoint_limit(env.name),
        safe_margin=margin,
        min_spacing=_num(cfg.min_spacing),
        tolerance=_num(cfg.tolerance_t),
        **pose_values,
    )
    if obstacles:
        listing = "\n".join(f"- center ({_num(o.center[0])}, {_num(o.center[1])}), radius {_num(o.radius)} m"
                            for o in obstacles)
        user_prompt = f"{user_prompt}\n\n" + _render("obstacle.txt", obstacles=listing, clearance=_num(clearance))
    request = PlanningRequest(env, pose, target, cfg, tuple(obstacles), clearance)
    return PromptPair(system_prompt, user_prompt, request)


# ---------------------------------------------------------------------------
# Waypoint wire format

_DECODER = json.JSONDecoder()
_ARRAY_START = re.compile(r"\[\s*\{")


def _as_coordinate(value: object) -> Optional[float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    try:
        number = float(value)
    except OverflowError:
        return None
    return number if math.isfinite(number) else None


def parse_waypoints(text: Union[str, bytes], max_chars: int = MAX_RESPONSE_CHARS) -> List[Point]:
    """Extract the first JSON array of {"x", "y"} objects embedded in ``text``.

    Decoding is only attempted where a ``[`` opens onto a ``{``, at most
    MAX_ARRAY_CANDIDATES times, so garbage replies fail in linear time.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    if not isinstance(text, str):
        raise ParseFailure(f"Expected text, got {type(text).__name__}")

    if len(text) > max_chars:
        raise ParseFailure(f"Provider output is {len(text)} characters, limit is {max_chars}")

    for attempt, match in enumerate(_ARRAY_START.finditer(text)):
        if attempt >= MAX_ARRAY_CANDIDATES:
            break
        try:
            value, _ = _DECODER.raw_decode(text, match.start())
        except (ValueError, RecursionError):
            value = None
        if isinstance(value, list) and value and all(isinstance(item, dict) for item in value):
            points: List[Point] = []
            for index, item in enumerate(value):
                x, y = _as_coordinate(item.get("x")), _as_coordinate(item.get("y"))
                if x is None or y is None:
                    raise ParseFailure(f"Array element {index} lacks finite numeric 'x'/'y': {item!r}"[:200])
                points.append((x, y))
            return points
    raise ParseFailure("No JSON array of waypoints found in provider output")


def serialize_waypoints(points: Sequence[Point]) -> str:
    return json.dumps([{"x": float(p[0]), "y": float(p[1])} for p in points])


# ---------------------------------------------------------------------------
# Validation

def validate_path(
    points: Sequence[Point],
    env: EnvironmentMap,
    target: TargetObject,
    cfg: PlannerConfig,
    provider: str = "unknown",
) -> Path:
    """Filter waypoints by margin and spacing, then enforce final-point tolerance.

    Raises AllWaypointsInvalid or TargetUnreachable carrying the report.
    """
    report = ValidationReport()
    if not points:
        raise AllWaypointsInvalid("No waypoints to validate", report)

    inside: List[Tuple[int, Point]] = []
    for index, p in enumerate(points):
        if not (math.isfinite(p[0]) and math.isfinite(p[1])):
            report.rejected.append(RejectedPoint(index, p, "non-finite coordinate"))
        elif within_margin(env, p):
            inside.append((index, p))
        else:
            report.rejected.append(RejectedPoint(index, p, "outside the corridor safe margin"))
    if not inside:
        raise AllWaypointsInvalid(f"All {len(points)} waypoints violate the safe margin", report)

    kept: List[Point] = []
    kept_index: List[int] = []
    last = len(inside) - 1
    for n, (index, p) in enumerate(inside):
        if kept and n != last and distance_to(kept[-1], p) < cfg.min_spacing - SPACING_EPS:
            report.rejected.append(RejectedPoint(index, p, f"closer than {_num(cfg.min_spacing)} m to previous waypoint"))
            continue
        kept.append(p)
        kept_index.append(index)

    d = distance_to(kept[-1], target.position)
    if d > cfg.tolerance_t:
        if not within_margin(env, target.position):
            report.final_distance = d
            raise TargetUnreachable(f"Final waypoint {_num(d)} m from {target.name} and target lies outside the margin", report)
        kept.append(target.position)
        report.appended_target = True
        # the old final point is no longer exempt from spacing
        if len(kept) >= 3 and distance_to(kept[-3], kept[-2]) < cfg.min_spacing - SPACING_EPS:
            report.rejected.append(RejectedPoint(kept_index[-1], kept[-2], "closer than min spacing once target appended"))
            del kept[-2]

    if report.rejected:
        logger.warning(f"Discarded {len(report.rejected)} waypoint(s): {report.summary()}")
    return Path(tuple(kept), provider, True, target, report)


# ---------------------------------------------------------------------------
# Geometric oracle

def _corridor_graph(env: EnvironmentMap) -> Dict[str, List[Tuple[str, Point]]]:
    graph: Dict[str, List[Tuple[str, Point]]] = {c.name: [] for c in env.corridors}
    for j in env.junctions:
        a, b = j.connects
        graph[a].append((b, j.position))
        graph[b].append((a, j.position))
    return graph


def _route(env: EnvironmentMap, start: Point, goal: Point) -> List[Tuple[Point, Corridor]]:
    """Anchor points (junctions then goal) with the corridor each leg runs in."""
    start_set = env.margin_corridors(start) or [c for c in env.corridors if c.contains(start)]
    goal_set = env.margin_corridors(goal)
    if not start_set or not goal_set:
        raise TargetUnreachable(f"Start {start} or goal {goal} lies outside every corridor")
    goal_names = {c.name for c in goal_set}
    for c in start_set:
        if c.name in goal_names:
            return [(goal, c)]

    graph = _corridor_graph(env)
    parent: Dict[str, Optional[Tuple[str, Point]]] = {c.name: None for c in start_set}
    queue = deque(c.name for c in start_set)
    reached: Optional[str] = None
    while queue:
        node = queue.popleft()
        if node in goal_names:
            reached = node
            break
        for neighbor, junction in graph[node]:
            if neighbor not in parent:
                parent[neighbor] = (node, junction)
                queue.append(neighbor)
    if reached is None:
        raise TargetUnreachable(f"No junction path connects {[c.name for c in start_set]} to {sorted(goal_names)}")

    hops: List[Tuple[str, Point]] = []
    node = reached
    while parent[node] is not None:
        prev, junction = parent[node]  # type: ignore[misc]
        hops.append((prev, junction))
        node = prev
    hops.reverse()
    legs = [(junction, env.corridor(corridor)) for corridor, junction in hops]
    legs.append((goal, env.corridor(reached)))
    return legs


def _detour(
    a: Point,
    b: Point,
    corridor: Corridor,
    obstacles: Sequence[Circle],
    clearance: float,
    margin: float,
    depth: int = 0,
) -> List[Point]:
    """Anchors leading from ``a`` to ``b`` that pass blocking obstacles on one side."""
    length = distance_to(a, b)
    if length <= SPACING_EPS or depth > 4:
        return [b]
    ux, uy = (b[0] - a[0]) / length, (b[1] - a[1]) / length
    blocking = []
    for o in obstacles:
        s = (o.center[0] - a[0]) * ux + (o.center[1] - a[1]) * uy
        gap = _segment_clearance(a, b, o)
        if gap <= clearance + SPACING_EPS:
            blocking.append((s, o))
    if not blocking:
        return [b]
    blocking.sort(key=lambda item: item[0])
    s_c, o = blocking[0]
    rest = [other for other in obstacles if other is not o]

    nx, ny = -uy, ux
    lateral = (o.center[0] - a[0]) * nx + (o.center[1] - a[1]) * ny
    offset = o.radius + clearance + DETOUR_BUFFER
    sides = (-1.0, 1.0) if lateral > 0 else (1.0, -1.0)
    for side in sides:
        cx, cy = o.center[0] + side * offset * nx, o.center[1] + side * offset * ny
        anchors = [(cx - offset * ux, cy - offset * uy), (cx, cy)]
        if s_c + offset < length:
            anchors.append((cx + offset * ux, cy + offset * uy))
        if not all(corridor.contains(p, margin) for p in anchors):
            continue
        tail = anchors + [b]
        if any(_segment_clearance(p, q, o) <= clearance for p, q in zip(tail[1:], tail[2:])):
            continue
        result: List[Point] = []
        prev = a
        for anchor in tail:
            result.extend(_detour(prev, anchor, corridor, rest, clearance, margin, depth + 1))
            prev = anchor
        return result
    raise TargetUnreachable(f"No room to pass obstacle at {o.center} inside {corridor.name}")


def _segment_clearance(a: Point, b: Point, o: Circle) -> float:
    return segment_point_distance(a, b, o.center) - o.radius


def oracle_plan(
    env: EnvironmentMap,
    pose: Pose,
    target: TargetObject,
    cfg: PlannerConfig,
    obstacles: Sequence[Circle] = (),
    clearance: float = 0.0,
) -> List[Point]:
    """Deterministic corridor planner: straight legs through junctions at min_spacing steps."""
    start, goal = pose.position, target.position
    if not within_margin(env, goal):
        raise TargetUnreachable(f"Target {target.name} lies outside the safe margin")

    anchors: List[Tuple[Point, Corridor]] = []
    prev = start
    for anchor, corridor in _route(env, start, goal):
        for p in _detour(prev, anchor, corridor, obstacles, clearance, env.safe_margin) if obstacles else [anchor]:
            anchors.append((p, corridor))
        prev = anchor

    spacing = cfg.min_spacing
    points: List[Point] = []
    prev = start
    for n, (anchor, corridor) in enumerate(anchors):
        final = n == len(anchors) - 1
        length = distance_to(prev, anchor)
        if length > SPACING_EPS:
            ux, uy = (anchor[0] - prev[0]) / length, (anchor[1] - prev[1]) / length
            k = 1
            while k * spacing <= length - spacing + 1e-12:
                p = corridor.clamp((prev[0] + ux * k * spacing, prev[1] + uy * k * spacing), env.safe_margin)
                if all(o.clearance(p) > clearance for o in obstacles):
                    points.append(p)
                k += 1
        if final:
            if not points or points[-1] != anchor:
                points.append(anchor)
        elif not points or distance_to(points[-1], anchor) >= spacing - 1e-12:
            points.append(anchor)
        prev = anchor
    return points


# ---------------------------------------------------------------------------
# Planning loop

def plan(
    command: Command,
    pose: Pose,
    env: EnvironmentMap,
    provider: "WaypointProvider",
    cfg: PlannerConfig,
    obstacles: Sequence[Circle] = (),
    clearance: float = 0.0,
    extra_check: Optional[Callable[[Path], List[str]]] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> Tuple[Path, PlanningStats]:
    """Prompt, generate, parse and validate, regenerating up to max_parse_retries times."""
    target = env.object(command.target_name)
    base = build_prompts(env, pose, target, cfg, command.raw_text, obstacles, clearance)
    prompts = base
    stats = PlanningStats()
    t_x = clock()
    logger.info(f"Planning path to {target.name} from ({_num(pose.x)}, {_num(pose.y)}) via {provider.descriptor.label}")

    for attempt in range(1, cfg.max_parse_retries + 1):
        stats.attempts = attempt
        try:
            text = provider.generate(prompts, timeout=cfg.provider_timeout)
            points = parse_waypoints(text, cfg.max_response_chars)
            path = validate_path(points, env, target, cfg, provider=provider.descriptor.label)
            problems = extra_check(path) if extra_check else []
            if problems:
                raise ValidationError("; ".join(problems), path.report)
        except ProviderUnavailable:
            stats.planning_time = clock() - t_x
            logger.error(f"Provider {provider.descriptor.label} unavailable on attempt {attempt}")
            raise
        except (ParseFailure, ValidationError, ProviderError) as e:
            reason = str(e)
            report = getattr(e, "report", None)
            if report is not None and report.rejected:
                reason = f"{reason} ({report.summary()})"
            stats.reasons.append(reason)
            logger.warning(f"Planning attempt {attempt}/{cfg.max_parse_retries} failed: {reason}")
            prompts = base.regenerate(attempt, [reason])
            continue
        stats.successes = 1
        stats.planning_time = clock() - t_x
        logger.info(f"Planned {len(path.waypoints)} waypoints to {target.name} on attempt {attempt}")
        return path, stats

    stats.planning_time = clock() - t_x
    raise PlanningFailed(
        f"No valid path to {target.name} after {stats.attempts} attempts",
        stats=stats,
        reasons=stats.reasons,
    )
