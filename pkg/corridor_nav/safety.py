"""Frontal-cone obstacle assessment, the emergency replan policy and obstacle-aware replanning."""

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .control import Pose
from .exceptions import ConfigurationError, PlanningFailed, ReplanFailed, ReplanPolicyError
from .planning import Command, Path, PlannerConfig, PlanningStats, plan
from .providers import WaypointProvider
from .world import Circle, EnvironmentMap, ScanData, TargetObject

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SafetyConfig:
    """Detection thresholds and replan policy.

    Both distance thresholds apply inside the frontal cone only. Inside the
    slow-stop band forward speed is capped at ``creep_speed``.
    """
    d_slowstop: float = 0.5
    d_emergency: float = 0.35
    frontal_half_angle: float = math.radians(15.0)
    max_replans: int = 5
    cooldown: float = 5.0
    obstacle_radius: float = 0.3
    creep_speed: float = 0.05
    replan_samples: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.d_emergency <= self.d_slowstop:
            raise ConfigurationError("SafetyConfig requires 0 < d_emergency <= d_slowstop")
        if not 0 < self.frontal_half_angle < math.pi:
            raise ConfigurationError("SafetyConfig.frontal_half_angle must lie in (0, pi)")
        if self.max_replans < 1:
            raise ConfigurationError("SafetyConfig.max_replans must be >= 1")
        if self.cooldown <= 0:
            raise ConfigurationError("SafetyConfig.cooldown must be positive")
        if self.obstacle_radius <= 0 or self.creep_speed < 0:
            raise ConfigurationError("SafetyConfig.obstacle_radius must be positive and creep_speed non-negative")
        if self.replan_samples < 1:
            raise ConfigurationError("SafetyConfig.replan_samples must be >= 1")


class AssessmentLevel(str, Enum):
    CLEAR = "clear"
    SLOW_STOP = "slow_stop"
    EMERGENCY = "emergency"


@dataclass(frozen=True)
class Assessment:
    level: AssessmentLevel
    min_range: float
    bearing: float = 0.0


def assess(scan: ScanData, cfg: SafetyConfig) -> Assessment:
    """Classify the closest frontal-cone return against the two thresholds."""
    cone = np.abs(scan.bearings) < cfg.frontal_half_angle
    if not np.any(cone):
        return Assessment(AssessmentLevel.CLEAR, float(scan.max_range), 0.0)
    ranges = scan.ranges[cone]
    i = int(np.argmin(ranges))
    r, bearing = float(ranges[i]), float(scan.bearings[cone][i])
    if r < cfg.d_emergency:
        return Assessment(AssessmentLevel.EMERGENCY, r, bearing)
    if r < cfg.d_slowstop:
        return Assessment(AssessmentLevel.SLOW_STOP, r, bearing)
    return Assessment(AssessmentLevel.CLEAR, r, bearing)


@dataclass(frozen=True)
class ReplanLedger:
    attempts: int = 0
    last_replan_time: Optional[float] = None


def should_replan(ledger: ReplanLedger, now: float, cfg: SafetyConfig) -> bool:
    if ledger.attempts >= cfg.max_replans:
        return False
    return ledger.last_replan_time is None or (now - ledger.last_replan_time) > cfg.cooldown


def record_attempt(ledger: ReplanLedger, now: float, cfg: SafetyConfig) -> ReplanLedger:
    """Count a replan attempt at ``now``; the policy must allow it."""
    if not should_replan(ledger, now, cfg):
        raise ReplanPolicyError(
            f"Replan at t={now:.2f} not allowed (attempts={ledger.attempts}, last={ledger.last_replan_time})"
        )
    return ReplanLedger(ledger.attempts + 1, now)


def estimate_obstacle(pose: Pose, assessment: Assessment, cfg: SafetyConfig) -> Circle:
    """Circle at the emergency return: pose + min frontal range along the beam bearing."""
    heading = pose.theta + assessment.bearing
    center = (pose.x + assessment.min_range * math.cos(heading),
              pose.y + assessment.min_range * math.sin(heading))
    return Circle(center, cfg.obstacle_radius)


def clearance_problems(path: Path, obstacles: Sequence[Circle], clearance: float) -> List[str]:
    problems = []
    for x, y in path.waypoints:
        for o in obstacles:
            gap = o.clearance((x, y))
            if gap <= clearance:
                problems.append(
                    f"waypoint ({x:.3f}, {y:.3f}) is {gap:.3f} m from obstacle at "
                    f"({o.center[0]:.3f}, {o.center[1]:.3f}), needs more than {clearance} m"
                )
    return problems


def _merge(total: PlanningStats, part: PlanningStats) -> None:
    total.attempts += part.attempts
    total.successes += part.successes
    total.planning_time += part.planning_time
    total.reasons.extend(part.reasons)


def replan_around(
    env: EnvironmentMap,
    pose: Pose,
    target: TargetObject,
    obstacle_estimate: Circle,
    cfg_planner: PlannerConfig,
    cfg_safety: SafetyConfig,
    provider: WaypointProvider,
    known_obstacles: Sequence[Circle] = (),
    command: Optional[Command] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> Tuple[Path, PlanningStats]:
    """Plan a fresh path that keeps every waypoint clear of all known obstacles.

    Args:
        env: Environment map
        pose: Robot pose at the emergency stop (map frame)
        target: Target of the running command
        obstacle_estimate: Circle estimated from the emergency return
        cfg_planner: Planner settings
        cfg_safety: Clearance and sample count
        provider: Waypoint provider
        known_obstacles: Estimates retained from earlier replans of this command
        command: Running command; a synthetic one is used when omitted
        clock: Planning clock

    Returns:
        Shortest valid candidate and the merged planning stats

    Raises:
        ReplanFailed: No sample produced a valid path
    """
    obstacles = tuple(o for o in known_obstacles if o != obstacle_estimate) + (obstacle_estimate,)
    command = command or Command(f"go to {target.name}", target.name)
    clearance = cfg_safety.d_slowstop
    logger.info(
        f"Replanning to {target.name} around obstacle at "
        f"({obstacle_estimate.center[0]:.2f}, {obstacle_estimate.center[1]:.2f}), {len(obstacles)} known"
    )

    total = PlanningStats()
    candidates: List[Path] = []
    for _ in range(cfg_safety.replan_samples):
        try:
            path, stats = plan(
                command, pose, env, provider, cfg_planner,
                obstacles=obstacles,
                clearance=clearance,
                extra_check=lambda p: clearance_problems(p, obstacles, clearance),
                clock=clock,
            )
        except PlanningFailed as e:
            if e.stats is not None:
                _merge(total, e.stats)
            continue
        _merge(total, stats)
        candidates.append(path)

    if not candidates:
        logger.error(f"Replanning to {target.name} failed after {total.attempts} attempts")
        raise ReplanFailed(f"No obstacle-clearing path to {target.name}", stats=total)
    best = min(candidates, key=lambda p: p.length(pose.position))
    logger.info(f"Replanned path to {target.name}: {len(best.waypoints)} waypoints, {best.length(pose.position):.2f} m")
    return best, total
