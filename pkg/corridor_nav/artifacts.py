"""Run artifacts: trajectory and metrics CSVs, the aggregate report, event logs and the path plot."""

import csv
import io
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib import rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Circle as CirclePatch  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .metrics import (  # noqa: E402
    CommandLog,
    RunMetrics,
    TickRecord,
    aggregate,
    aggregate_csv,
    compute_run_metrics,
    metrics_csv,
    render_table,
)
from .world import EnvironmentMap  # noqa: E402

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("sim_time", "x", "y", "theta", "state", "v_linear", "v_angular")
PLOT_SALT = "corridor-nav"


def trajectory_csv(ticks: Sequence[TickRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for t in ticks:
        writer.writerow((f"{t.t:.3f}", f"{t.x:.6f}", f"{t.y:.6f}", f"{t.theta:.6f}",
                         t.state, f"{t.v_linear:.6f}", f"{t.v_angular:.6f}"))
    return buffer.getvalue()


def plot_paths(env: EnvironmentMap, logs: Sequence[CommandLog], path: Union[str, Path]) -> None:
    """SVG of corridor outlines, objects, planned waypoints and one trajectory line per command."""
    with rc_context({"svg.hashsalt": PLOT_SALT, "svg.fonttype": "none"}):
        fig = Figure(figsize=(8, 8))
        ax = fig.add_subplot()
        for c in env.corridors:
            ax.add_patch(Rectangle((c.x_min, c.y_min), c.x_max - c.x_min, c.y_max - c.y_min,
                                   fill=False, edgecolor="0.3", linewidth=1.0))
        for w in env.walls:
            ax.plot([w.start[0], w.end[0]], [w.start[1], w.end[1]], color="black", linewidth=1.5)
        ax.scatter([o.position[0] for o in env.objects], [o.position[1] for o in env.objects],
                   marker="s", s=12, color="tab:gray", label="objects")
        for o in env.dynamic_obstacles:
            ax.add_patch(CirclePatch(o.center, o.radius, color="tab:red", alpha=0.4))

        for log in logs:
            for record in log.planning:
                if record.waypoints:
                    xs, ys = zip(*record.waypoints)
                    ax.plot(xs, ys, linestyle="none", marker="o", markersize=3, color="tab:orange")
            line, = ax.plot([t.x for t in log.ticks], [t.y for t in log.ticks], linewidth=1.2,
                            label=f"{log.index}: {log.target}")
            line.set_gid(f"trajectory-{log.index}")

        x_min, x_max, y_min, y_max = env.bounds()
        ax.set_xlim(x_min - 0.5, x_max + 0.5)
        ax.set_ylim(y_min - 0.5, y_max + 0.5)
        ax.set_aspect("equal")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.set_title(f"{env.name}")
        ax.legend(loc="best", fontsize="x-small")
        fig.savefig(path, format="svg", metadata={"Date": None})


def write_reports(out_dir: Path, rows: Sequence[RunMetrics]) -> List[Path]:
    summary = aggregate(rows)
    written = []
    for name, text in (("metrics.csv", metrics_csv(rows)),
                       ("aggregate.txt", render_table(rows, summary)),
                       ("aggregate.csv", aggregate_csv(summary))):
        target = out_dir / name
        target.write_text(text, encoding="utf-8")
        written.append(target)
    return written


def write_artifacts(
    out_dir: Union[str, Path],
    env: EnvironmentMap,
    logs: Sequence[CommandLog],
    meta: Dict[str, Any],
) -> List[Path]:
    """Write every artifact of a run; run_meta.json is the only file that changes between runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for log in logs:
        trajectory = out / f"trajectory_{log.index}.csv"
        trajectory.write_text(trajectory_csv(log.ticks), encoding="utf-8")
        events = out / f"events_{log.index}.json"
        log.save(events)
        written.extend([trajectory, events])

    written.extend(write_reports(out, [compute_run_metrics(log) for log in logs]))
    plot = out / "path_plot.svg"
    plot_paths(env, logs, plot)
    written.append(plot)

    run_meta = out / "run_meta.json"
    run_meta.write_text(
        json.dumps({"created": datetime.now(timezone.utc).isoformat(), **meta}, indent=2, default=str),
        encoding="utf-8",
    )
    written.append(run_meta)
    logger.info(f"Wrote {len(written)} artifacts to {out}")
    return written


def load_logs(out_dir: Union[str, Path]) -> List[CommandLog]:
    """Event logs of a finished run, in command order."""
    out = Path(out_dir)
    logs = [CommandLog.load(p) for p in out.glob("events_*.json")]
    return sorted(logs, key=lambda log: log.index)


def rebuild_reports(out_dir: Union[str, Path]) -> List[Path]:
    """Recompute metrics.csv and the aggregate report from persisted event logs."""
    out = Path(out_dir)
    logs = load_logs(out)
    if not logs:
        raise FileNotFoundError(f"No events_*.json logs in {out}")
    return write_reports(out, [compute_run_metrics(log) for log in logs])
