"""Navigation state machine and kinematic simulator.

One command runs Plan -> Track -> Assess -> (Replan | Complete) on a fixed
tick: inject scripted obstacles, sense, decide, integrate, check collisions.
Planning happens while the robot is stationary and consumes no sim time.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set

from .control import (
    STOP,
    ControllerConfig,
    Frame,
    FramedPoint,
    Pose,
    VelocityCommand,
    control_step,
    map_to_odom,
    normalize_angle,
    pose_to_odom,
)
from .exceptions import ConfigurationError, IllegalTransition, PlanningFailed, ProviderUnavailable, ReplanFailed
from .metrics import CommandLog, PlanningRecord, ReplanRecord, RunMetrics, TickRecord, compute_run_metrics
from .planning import Command, Path, PlannerConfig, PlanningStats, plan
from .providers import WaypointProvider
from .safety import (
    AssessmentLevel,
    ReplanLedger,
    SafetyConfig,
    assess,
    estimate_obstacle,
    record_attempt,
    replan_around,
    should_replan,
)
from .world import Circle, EnvironmentMap, cast_scan, containing_corridor

logger = logging.getLogger(__name__)

COLLISION_TOLERANCE = 1e-6

PLANNING_FAILED = "PlanningFailed"
PROVIDER_UNAVAILABLE = "ProviderUnavailable"
REPLAN_FAILED = "ReplanFailed"
REPLAN_LIMIT = "ReplanLimit"
COLLISION = "Collision"
TIMEOUT = "Timeout"


class NavStatus(str, Enum):
    IDLE = "Idle"
    PLANNING = "Planning"
    NAVIGATING = "Navigating"
    EMERGENCY_STOP = "EmergencyStop"
    REPLANNING = "Replanning"
    COMPLETED = "Completed"
    FAILED = "Failed"


LEGAL_TRANSITIONS: Dict[NavStatus, FrozenSet[NavStatus]] = {
    NavStatus.IDLE: frozenset({NavStatus.PLANNING}),
    NavStatus.PLANNING: frozenset({NavStatus.NAVIGATING, NavStatus.FAILED}),
    NavStatus.NAVIGATING: frozenset({NavStatus.NAVIGATING, NavStatus.EMERGENCY_STOP,
                                     NavStatus.COMPLETED, NavStatus.FAILED}),
    NavStatus.EMERGENCY_STOP: frozenset({NavStatus.REPLANNING, NavStatus.FAILED}),
    NavStatus.REPLANNING: frozenset({NavStatus.NAVIGATING, NavStatus.FAILED}),
    NavStatus.COMPLETED: frozenset(),
    NavStatus.FAILED: frozenset(),
}


@dataclass(frozen=True)
class NavState:
    status: NavStatus = NavStatus.IDLE
    waypoint_index: Optional[int] = None
    reason: Optional[str] = None

    @property
    def terminal(self) -> bool:
        return self.status in (NavStatus.COMPLETED, NavStatus.FAILED)

    @property
    def label(self) -> str:
        if self.status is NavStatus.NAVIGATING:
            return f"Navigating({self.waypoint_index})"
        if self.status is NavStatus.FAILED:
            return f"Failed({self.reason})"
        return self.status.value

    def to(self, status: NavStatus, waypoint_index: Optional[int] = None, reason: Optional[str] = None) -> "NavState":
        """Next state; raises IllegalTransition outside the legal set."""
        if status not in LEGAL_TRANSITIONS[self.status]:
            raise IllegalTransition(f"{self.label} -> {status.value} is not a legal transition")
        if status is NavStatus.NAVIGATING:
            if waypoint_index is None:
                raise IllegalTransition("Navigating requires a waypoint index")
            if self.status is NavStatus.NAVIGATING and waypoint_index != (self.waypoint_index or 0) + 1:
                raise IllegalTransition(f"Waypoint index may only advance by one: {self.waypoint_index} -> {waypoint_index}")
        if status is NavStatus.FAILED and not reason:
            raise IllegalTransition("Failed requires a reason")
        return NavState(status, waypoint_index, reason)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    lidar_beams: int = 360
    lidar_max_range: float = 3.5
    max_sim_time: float = 300.0
    planning_clock: str = "sim"

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.max_sim_time <= 0:
            raise ConfigurationError("SimConfig.dt and max_sim_time must be positive")
        if self.lidar_beams < 1 or self.lidar_max_range <= 0:
            raise ConfigurationError("SimConfig lidar settings must be positive")
        if self.planning_clock not in ("sim", "wall"):
            raise ConfigurationError(f"SimConfig.planning_clock must be 'sim' or 'wall', got {self.planning_clock!r}")


@dataclass(frozen=True)
class RobotState:
    pose: Pose
    odom_pose: Pose
    commanded: VelocityCommand = STOP
    sim_time: float = 0.0


def _integrate(pose: Pose, cmd: VelocityCommand, dt: float) -> Pose:
    return Pose(
        pose.x + cmd.linear * math.cos(pose.theta) * dt,
        pose.y + cmd.linear * math.sin(pose.theta) * dt,
        normalize_angle(pose.theta + cmd.angular * dt),
    )


def step_kinematics(state: RobotState, cmd: VelocityCommand, dt: float) -> RobotState:
    """Forward-Euler unicycle step of both the map pose and the odometry pose."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return RobotState(
        pose=_integrate(state.pose, cmd, dt),
        odom_pose=_integrate(state.odom_pose, cmd, dt),
        commanded=cmd,
        sim_time=state.sim_time + dt,
    )


@dataclass(frozen=True)
class ObstacleInjection:
    """Obstacle that appears during command ``command`` once its sim time reaches ``at``."""
    command: int
    at: float
    x: float
    y: float
    radius: float
    until: Optional[float] = None

    @property
    def circle(self) -> Circle:
        return Circle((self.x, self.y), self.radius)


@dataclass
class CommandResult:
    state: NavState
    metrics: RunMetrics
    log: CommandLog
    paths: List[Path] = field(default_factory=list)

    @property
    def trajectory(self) -> List[TickRecord]:
        return self.log.ticks

    @property
    def completed(self) -> bool:
        return self.state.status is NavStatus.COMPLETED


def _planning_record(kind: str, t: float, stats: Optional[PlanningStats], path: Optional[Path]) -> PlanningRecord:
    stats = stats or PlanningStats(attempts=1)
    return PlanningRecord(
        kind=kind,
        sim_time=t,
        attempts=stats.attempts,
        successes=stats.successes,
        duration=stats.planning_time,
        waypoints=tuple(path.waypoints) if path else (),
        reasons=tuple(stats.reasons),
    )


class Navigator:
    """Runs commands against one environment, carrying the robot pose between them."""

    def __init__(
        self,
        env: EnvironmentMap,
        provider: WaypointProvider,
        planner: Optional[PlannerConfig] = None,
        controller: Optional[ControllerConfig] = None,
        safety: Optional[SafetyConfig] = None,
        sim: Optional[SimConfig] = None,
        injections: Sequence[ObstacleInjection] = (),
    ) -> None:
        self.env = env
        self.provider = provider
        self.planner = planner or PlannerConfig()
        self.controller = controller or ControllerConfig()
        self.safety = safety or SafetyConfig()
        self.sim = sim or SimConfig()
        self.injections = list(injections)
        self.pose = env.start_pose
        self.state = NavState()

    def reset(self, pose: Optional[Pose] = None) -> None:
        self.pose = pose or self.env.start_pose
        self.state = NavState()
        self.env.clear_obstacles()

    def _apply_injections(self, index: int, t: float, applied: Set[int]) -> None:
        for n, inj in enumerate(self.injections):
            if inj.command != index:
                continue
            if n not in applied and t >= inj.at:
                self.env.inject_obstacle(inj.circle)
                applied.add(n)
            elif n in applied and inj.until is not None and t >= inj.until:
                self.env.remove_obstacle(inj.circle)

    def _collides(self, pose: Pose) -> bool:
        p = pose.position
        if containing_corridor(self.env, p, tolerance=COLLISION_TOLERANCE) is None:
            return True
        return any(o.clearance(p) < 0.0 for o in self.env.dynamic_obstacles)

    def run_command(self, command: Command, index: int = 1) -> CommandResult:
        """Plan and drive one command to a terminal state.

        Args:
            command: Parsed command
            index: 1-based position of the command in its sequence; selects scripted injections

        Returns:
            CommandResult with terminal state, metrics and the full event log
        """
        env, sim, safety = self.env, self.sim, self.safety
        target = env.object(command.target_name)
        log = CommandLog(index, command.raw_text, target.name, env.name,
                         self.provider.descriptor.label, d_critical=safety.d_slowstop)
        anchor = self.pose
        robot = RobotState(anchor, pose_to_odom(anchor, anchor))
        nav = NavState()
        paths: List[Path] = []

        def move(status: NavStatus, waypoint_index: Optional[int] = None, reason: Optional[str] = None) -> None:
            nonlocal nav
            nav = nav.to(status, waypoint_index, reason)
            self.state = nav
            log.transitions.append((robot.sim_time, nav.label))
            logger.info(f"[{index}] t={robot.sim_time:.2f}s {nav.label}")

        clock: Callable[[], float] = (lambda: robot.sim_time) if sim.planning_clock == "sim" else time.perf_counter

        logger.info(f"[{index}] Command '{command.raw_text}' -> {target.name}")
        move(NavStatus.PLANNING)
        path: Optional[Path] = None
        try:
            path, stats = plan(command, robot.pose, env, self.provider, self.planner, clock=clock)
        except PlanningFailed as e:
            log.planning.append(_planning_record("initial", 0.0, e.stats, None))
            move(NavStatus.FAILED, reason=PLANNING_FAILED)
        except ProviderUnavailable as e:
            logger.error(f"[{index}] {e}")
            log.planning.append(_planning_record("initial", 0.0, None, None))
            move(NavStatus.FAILED, reason=PROVIDER_UNAVAILABLE)
        else:
            paths.append(path)
            log.planning.append(_planning_record("initial", 0.0, stats, path))
            move(NavStatus.NAVIGATING, waypoint_index=0)

        log.ticks.append(TickRecord(0.0, robot.pose.x, robot.pose.y, robot.pose.theta, nav.label))
        ledger = ReplanLedger()
        known: List[Circle] = []
        pending: Optional[Circle] = None
        applied: Set[int] = set()

        while not nav.terminal and path is not None:
            t = robot.sim_time
            if t >= sim.max_sim_time:
                move(NavStatus.FAILED, reason=TIMEOUT)
                break
            self._apply_injections(index, t, applied)

            # sense
            scan = cast_scan(env, robot.pose, sim.lidar_beams, sim.lidar_max_range, stamp=t)
            reading = assess(scan, safety)

            # decide
            cmd = STOP
            if nav.status is NavStatus.NAVIGATING:
                cmd = self._track(path, anchor, robot, nav, move)
                if nav.terminal:
                    break
                if reading.level is AssessmentLevel.EMERGENCY and cmd.linear > 0.0:
                    cmd = STOP
                    pending = estimate_obstacle(robot.pose, reading, safety)
                    logger.warning(
                        f"[{index}] Obstacle {reading.min_range:.2f} m ahead at t={t:.2f}s, emergency stop"
                    )
                    move(NavStatus.EMERGENCY_STOP)
                elif reading.level is AssessmentLevel.SLOW_STOP and cmd.linear > safety.creep_speed:
                    cmd = VelocityCommand(safety.creep_speed, cmd.angular)
            elif nav.status is NavStatus.EMERGENCY_STOP:
                if should_replan(ledger, t, safety):
                    ledger = record_attempt(ledger, t, safety)
                    move(NavStatus.REPLANNING)
                    obstacle = pending or estimate_obstacle(robot.pose, reading, safety)
                    record = (obstacle.center[0], obstacle.center[1], obstacle.radius)
                    try:
                        path, stats = replan_around(env, robot.pose, target, obstacle, self.planner, safety,
                                                    self.provider, known, command, clock)
                    except ReplanFailed as e:
                        log.planning.append(_planning_record("replan", t, e.stats, None))
                        log.replans.append(ReplanRecord(t, record, False))
                        move(NavStatus.FAILED, reason=REPLAN_FAILED)
                        break
                    except ProviderUnavailable as e:
                        logger.error(f"[{index}] {e}")
                        log.planning.append(_planning_record("replan", t, None, None))
                        log.replans.append(ReplanRecord(t, record, False))
                        move(NavStatus.FAILED, reason=PROVIDER_UNAVAILABLE)
                        break
                    known.append(obstacle)
                    paths.append(path)
                    log.planning.append(_planning_record("replan", t, stats, path))
                    log.replans.append(ReplanRecord(t, record, True))
                    move(NavStatus.NAVIGATING, waypoint_index=0)
                elif ledger.attempts >= safety.max_replans:
                    logger.error(f"[{index}] Replan limit of {safety.max_replans} reached")
                    move(NavStatus.FAILED, reason=REPLAN_LIMIT)
                    break

            # act + integrate
            robot = step_kinematics(robot, cmd, sim.dt)
            log.ticks.append(TickRecord(robot.sim_time, robot.pose.x, robot.pose.y, robot.pose.theta,
                                        nav.label, cmd.linear, cmd.angular, reading.min_range))
            if self._collides(robot.pose):
                logger.error(f"[{index}] Collision at ({robot.pose.x:.3f}, {robot.pose.y:.3f})")
                move(NavStatus.FAILED, reason=COLLISION)

        self.pose = robot.pose
        for inj in self.injections:
            if inj.command == index and inj.until is not None:
                env.remove_obstacle(inj.circle)
        log.outcome = nav.status.value
        log.reason = nav.reason
        metrics = compute_run_metrics(log)
        logger.info(
            f"[{index}] {nav.label}: {metrics.path_length:.2f} m in {metrics.execution_time:.2f}s, "
            f"{metrics.replan_attempts} replans"
        )
        return CommandResult(nav, metrics, log, paths)

    def _track(self, path: Path, anchor: Pose, robot: RobotState, nav: NavState,
               move: Callable[..., None]) -> VelocityCommand:
        """Control toward the current waypoint in the odom frame, advancing past reached ones."""
        index = nav.waypoint_index or 0
        while True:
            x, y = path.waypoints[index]
            goal = map_to_odom(FramedPoint(x, y, Frame.MAP), anchor)
            out = control_step(robot.odom_pose, goal.position, self.controller)
            if not out.reached:
                return out.command
            if index == len(path.waypoints) - 1:
                move(NavStatus.COMPLETED)
                return STOP
            index += 1
            move(NavStatus.NAVIGATING, waypoint_index=index)

    def run_sequence(self, commands: Sequence[Command], continue_on_failure: bool = False) -> List[CommandResult]:
        """Run commands back to back, each starting where the previous one ended."""
        results: List[CommandResult] = []
        for index, command in enumerate(commands, start=1):
            result = self.run_command(command, index)
            results.append(result)
            if result.completed:
                continue
            if result.state.reason == PROVIDER_UNAVAILABLE or not continue_on_failure:
                logger.warning(f"Stopping sequence after command {index}: {result.state.label}")
                break
        return results

    def __repr__(self) -> str:
        return (f"Navigator(env='{self.env.name}', provider='{self.provider.descriptor.label}', "
                f"pose=({self.pose.x:.2f}, {self.pose.y:.2f}, {self.pose.theta:.2f}))")
