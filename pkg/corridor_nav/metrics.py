"""Per-command event logs and the evaluation metrics computed from them."""

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

D_CRITICAL = 0.5
COMPLETED = "Completed"


@dataclass(frozen=True)
class TickRecord:
    """Pose after one simulation tick and the command that produced it."""
    t: float
    x: float
    y: float
    theta: float
    state: str
    v_linear: float = 0.0
    v_angular: float = 0.0
    min_frontal_range: float = math.inf


@dataclass(frozen=True)
class PlanningRecord:
    kind: str  # "initial" or "replan"
    sim_time: float
    attempts: int
    successes: int
    duration: float
    waypoints: Tuple[Tuple[float, float], ...] = ()
    reasons: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ReplanRecord:
    sim_time: float
    obstacle: Tuple[float, float, float]
    succeeded: bool


@dataclass
class CommandLog:
    index: int
    command: str
    target: str
    environment: str
    provider: str
    ticks: List[TickRecord] = field(default_factory=list)
    planning: List[PlanningRecord] = field(default_factory=list)
    replans: List[ReplanRecord] = field(default_factory=list)
    transitions: List[Tuple[float, str]] = field(default_factory=list)
    outcome: str = ""
    reason: Optional[str] = None
    d_critical: float = D_CRITICAL

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        # json has no infinity
        data["ticks"] = [
            {**t, "min_frontal_range": None if math.isinf(t["min_frontal_range"]) else t["min_frontal_range"]}
            for t in data["ticks"]
        ]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CommandLog":
        ticks = [
            TickRecord(**{**t, "min_frontal_range": math.inf if t["min_frontal_range"] is None else t["min_frontal_range"]})
            for t in data["ticks"]
        ]
        planning = [
            PlanningRecord(**{**p, "waypoints": tuple(tuple(w) for w in p["waypoints"]),
                              "reasons": tuple(p["reasons"])})
            for p in data["planning"]
        ]
        replans = [ReplanRecord(r["sim_time"], tuple(r["obstacle"]), r["succeeded"]) for r in data["replans"]]
        return cls(
            index=data["index"],
            command=data["command"],
            target=data["target"],
            environment=data["environment"],
            provider=data["provider"],
            ticks=ticks,
            planning=planning,
            replans=replans,
            transitions=[(t, label) for t, label in data["transitions"]],
            outcome=data["outcome"],
            reason=data.get("reason"),
            d_critical=data.get("d_critical", D_CRITICAL),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CommandLog":
        return cls.from_dict(json.loads(text))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CommandLog":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class RunMetrics:
    index: int
    command: str
    target: str
    provider: str
    outcome: str
    reason: Optional[str]
    planning_time: float
    execution_time: float
    successes: int
    attempts: int
    path_length: float
    collision_events: int
    collision_raw: int
    replan_attempts: int

    @property
    def completed(self) -> bool:
        return self.outcome == COMPLETED

    @property
    def wgsr(self) -> Optional[float]:
        return wgsr(self.successes, self.attempts)

    @property
    def replanning_rate(self) -> Optional[float]:
        if self.execution_time <= 0:
            return None
        return self.replan_attempts / self.execution_time


def path_length(trajectory: Iterable[Any]) -> float:
    """Sum of Euclidean steps over poses given as (x, y) pairs or objects with x/y."""
    total = 0.0
    prev: Optional[Tuple[float, float]] = None
    for sample in trajectory:
        p = (sample.x, sample.y) if hasattr(sample, "x") else (sample[0], sample[1])
        if prev is not None:
            total += math.hypot(p[0] - prev[0], p[1] - prev[1])
        prev = p
    return total


def collision_events(ranges: Iterable[float], d_critical: float = D_CRITICAL) -> int:
    """Encounters below ``d_critical``; a run of consecutive readings below counts once."""
    events = 0
    below = False
    for r in ranges:
        if r < d_critical:
            if not below:
                events += 1
            below = True
        else:
            below = False
    return events


def collision_indicator_sum(ranges: Iterable[float], d_critical: float = D_CRITICAL) -> int:
    return sum(1 for r in ranges if r < d_critical)


def wgsr(successes: int, attempts: int) -> Optional[float]:
    """Waypoint generation success rate in percent; None when nothing was attempted."""
    if attempts <= 0:
        return None
    return 100.0 * successes / attempts


def compute_run_metrics(log: CommandLog) -> RunMetrics:
    """Derive every metric from the event log alone."""
    initial = [p for p in log.planning if p.kind == "initial"]
    planning_time = initial[0].duration if initial else 0.0

    execution_time = 0.0
    start_index = next(
        (i for i, t in enumerate(log.ticks) if t.v_linear != 0.0 or t.v_angular != 0.0), None
    )
    if start_index is not None:
        t_rho = log.ticks[start_index - 1].t if start_index > 0 else 0.0
        t_phi = log.ticks[-1].t
        execution_time = max(0.0, t_phi - t_rho)

    ranges = [t.min_frontal_range for t in log.ticks]
    return RunMetrics(
        index=log.index,
        command=log.command,
        target=log.target,
        provider=log.provider,
        outcome=log.outcome,
        reason=log.reason,
        planning_time=planning_time,
        execution_time=execution_time,
        successes=sum(p.successes for p in log.planning),
        attempts=sum(p.attempts for p in log.planning),
        path_length=path_length(log.ticks),
        collision_events=collision_events(ranges, log.d_critical),
        collision_raw=collision_indicator_sum(ranges, log.d_critical),
        replan_attempts=len(log.replans),
    )


@dataclass(frozen=True)
class AggregateSummary:
    count: int
    completed: int
    failed: int
    planning_time: Optional[float]
    execution_time: Optional[float]
    wgsr: Optional[float]
    path_length: Optional[float]
    collision_events: Optional[float]
    replan_attempts: Optional[float]
    replanning_rate: Optional[float]

    @property
    def annotation(self) -> str:
        return f" ({self.failed}*)" if self.failed else ""


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else None


def aggregate(rows: Sequence[RunMetrics]) -> AggregateSummary:
    """Means over completed commands; failures are counted for the "(N*)" annotation."""
    done = [r for r in rows if r.completed]
    return AggregateSummary(
        count=len(rows),
        completed=len(done),
        failed=len(rows) - len(done),
        planning_time=_mean([r.planning_time for r in done]),
        execution_time=_mean([r.execution_time for r in done]),
        wgsr=_mean([r.wgsr for r in done]),
        path_length=_mean([r.path_length for r in done]),
        collision_events=_mean([float(r.collision_events) for r in done]),
        replan_attempts=_mean([float(r.replan_attempts) for r in done]),
        replanning_rate=_mean([r.replanning_rate for r in done]),
    )


METRICS_COLUMNS = (
    "index", "command", "target", "provider", "outcome", "reason",
    "planning_time_s", "execution_time_s", "wp_successes", "wp_attempts", "wgsr_pct",
    "path_length_m", "collision_events", "collision_indicator_sum",
    "replan_attempts", "replanning_rate_per_s",
)


def _fmt(value: Optional[float], digits: int = 3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def metrics_rows(rows: Sequence[RunMetrics]) -> List[List[str]]:
    return [
        [
            str(r.index), r.command, r.target, r.provider, r.outcome, r.reason or "",
            _fmt(r.planning_time), _fmt(r.execution_time), str(r.successes), str(r.attempts),
            _fmt(r.wgsr, 2), _fmt(r.path_length), str(r.collision_events), str(r.collision_raw),
            str(r.replan_attempts), _fmt(r.replanning_rate, 4),
        ]
        for r in rows
    ]


def metrics_csv(rows: Sequence[RunMetrics]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    writer.writerows(metrics_rows(rows))
    return buffer.getvalue()


def _summary_pairs(summary: AggregateSummary) -> List[Tuple[str, str]]:
    note = summary.annotation
    return [
        ("Commands", f"{summary.count}"),
        ("Completed", f"{summary.completed}{note}"),
        ("Path Planning Time (s)", _fmt(summary.planning_time) + note),
        ("Execution Time (s)", _fmt(summary.execution_time) + note),
        ("WGSR (%)", _fmt(summary.wgsr, 2) + note),
        ("Path Length (m)", _fmt(summary.path_length) + note),
        ("Collision Detection Events", _fmt(summary.collision_events, 2) + note),
        ("Replan Attempts", _fmt(summary.replan_attempts, 2) + note),
        ("Replanning Rate (1/s)", _fmt(summary.replanning_rate, 4) + note),
    ]


def aggregate_csv(summary: AggregateSummary) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("metric", "value"))
    writer.writerows(_summary_pairs(summary))
    return buffer.getvalue()


def render_table(rows: Sequence[RunMetrics], summary: AggregateSummary) -> str:
    """Aligned text report: one line per command followed by the averages."""
    header = ("#", "Command", "Outcome", "Plan(s)", "Exec(s)", "WGSR(%)", "Length(m)", "Coll", "Replans")
    body = [
        (str(r.index), r.command, r.outcome if r.completed else f"{r.outcome}({r.reason})",
         _fmt(r.planning_time), _fmt(r.execution_time), _fmt(r.wgsr, 2), _fmt(r.path_length),
         str(r.collision_events), str(r.replan_attempts))
        for r in rows
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *body]]
    lines.append("")
    pairs = _summary_pairs(summary)
    label_width = max(len(k) for k, _ in pairs)
    lines.extend(f"{k.ljust(label_width)}  {v}" for k, v in pairs)
    return "\n".join(lines) + "\n"
