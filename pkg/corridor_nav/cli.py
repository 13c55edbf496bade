"""Command-line harness: scenario replay, interactive REPL and report regeneration."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

from . import __version__
from .artifacts import rebuild_reports, write_artifacts
from .config import Settings, load_settings
from .exceptions import ConfigurationError, ProviderUnavailable, TargetResolutionError
from .health import probe_endpoint
from .metrics import aggregate, render_table
from .navigator import PROVIDER_UNAVAILABLE, CommandResult, Navigator
from .planning import parse_command
from .providers import LlmProvider, OracleProvider, WaypointProvider, stub_provider
from .scenario import Scenario, load_scenario
from .world import BUILTIN_ENVIRONMENTS, Circle, EnvironmentMap, resolve_environment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COMMAND_FAILED = 1
EXIT_CONFIG = 2
EXIT_PROVIDER = 3

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

REPL_HELP = """commands:
  <text>         run a navigation command, e.g. "go to Room Number 101"
  inject x y r   add a circular obstacle at (x, y) with radius r
  clear          remove all injected obstacles
  where          print the robot pose
  help           show this help
  quit           leave the session"""


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", choices=("oracle", "llm", "stub"), default="oracle")
    parser.add_argument("--llm-url", help="Base URL of the chat-completion server")
    parser.add_argument("--model", help="Model name sent with each request")
    parser.add_argument("--stub-script", help="JSON file holding the list of canned stub responses")
    parser.add_argument("--settings", help="JSON file with settings overrides")
    parser.add_argument("--seed", type=int, help="Seed sent to the model server")
    parser.add_argument("--planning-clock", choices=("sim", "wall"),
                        help="Clock for planning time (default: sim for oracle/stub, wall for llm)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="Warnings and errors only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corridor-nav", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="action", required=True)

    run = sub.add_parser("run", help="Replay a scenario or a list of commands")
    _add_common(run)
    run.add_argument("--scenario", help="Scenario file or shipped scenario name")
    run.add_argument("--env", help=f"Environment for --command runs: {', '.join(BUILTIN_ENVIRONMENTS)} or a file")
    run.add_argument("--command", action="append", dest="commands", help="Command text (repeatable)")
    run.add_argument("--out-dir", default="runs", help="Artifact directory (default: runs)")
    run.add_argument("--continue-on-failure", action="store_true")

    repl = sub.add_parser("repl", help="Interactive text session")
    _add_common(repl)
    repl.add_argument("--env", default="env_a")

    report = sub.add_parser("report", help="Recompute metrics from persisted event logs")
    report.add_argument("out_dir")
    report.add_argument("--verbose", action="store_true")
    report.add_argument("--quiet", action="store_true")
    return parser


def resolve_settings(args: argparse.Namespace) -> Settings:
    """Defaults < settings file < environment variables < CLI flags."""
    settings = load_settings(args.settings)
    llm = settings.llm
    if args.llm_url:
        llm = replace(llm, base_url=args.llm_url)
    if args.model:
        llm = replace(llm, model_name=args.model)
    if args.seed is not None:
        llm = replace(llm, seed=args.seed)
    clock = args.planning_clock or ("wall" if args.provider == "llm" else "sim")
    return replace(settings, llm=llm, sim=replace(settings.sim, planning_clock=clock))


def make_provider(kind: str, settings: Settings, stub_script: Optional[str] = None) -> WaypointProvider:
    if kind == "oracle":
        return OracleProvider()
    if kind == "stub":
        if not stub_script:
            raise ConfigurationError("--provider stub needs --stub-script")
        try:
            script = json.loads(Path(stub_script).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read stub script {stub_script}: {e}") from e
        if not isinstance(script, list):
            raise ConfigurationError("Stub script must be a JSON list of response strings")
        return stub_provider([s if isinstance(s, str) else json.dumps(s) for s in script])
    probe = probe_endpoint(settings.llm.base_url)
    if not probe.ok:
        raise ProviderUnavailable(f"Model server at {settings.llm.base_url} is not reachable ({probe.reason})")
    return LlmProvider(settings.llm)


def _exit_status(results: Sequence[CommandResult], expected: int) -> int:
    if any(r.state.reason == PROVIDER_UNAVAILABLE for r in results):
        return EXIT_PROVIDER
    if len(results) == expected and all(r.completed for r in results):
        return EXIT_OK
    return EXIT_COMMAND_FAILED


def run_scenario(
    scenario: Scenario,
    provider: WaypointProvider,
    settings: Settings,
    out_dir: Path,
    continue_on_failure: bool = False,
    out: Optional[TextIO] = None,
) -> int:
    """Run every command of the scenario and write the artifacts.

    Returns:
        Exit status: 0 all completed, 1 a command failed, 3 provider unavailable

    Raises:
        ConfigurationError: Unknown environment or a command naming no object
    """
    env = resolve_environment(scenario.environment)
    try:
        commands = [parse_command(text, env, issued_at=0.0) for text in scenario.commands]
    except TargetResolutionError as e:
        raise ConfigurationError(f"Scenario {scenario.name}: {e} (candidates: {', '.join(e.candidates)})") from e

    navigator = Navigator(env, provider, settings.planner, settings.controller, settings.safety,
                          settings.sim, scenario.obstacle_script)
    logger.info(f"Running scenario {scenario.name} on {env.name} with {provider.descriptor.label}")
    results = navigator.run_sequence(commands, continue_on_failure or scenario.continue_on_failure)

    meta = {
        "scenario": scenario.name,
        "environment": env.name,
        "provider": provider.descriptor.label,
        "endpoint": provider.descriptor.endpoint,
        "temperature": settings.llm.temperature,
        "seed": settings.llm.seed,
        "settings": settings.to_dict(),
    }
    write_artifacts(out_dir, env, [r.log for r in results], meta)
    rows = [r.metrics for r in results]
    (out or sys.stdout).write(render_table(rows, aggregate(rows)))
    return _exit_status(results, len(commands))


def _command_scenario(args: argparse.Namespace) -> Scenario:
    if args.scenario:
        return load_scenario(args.scenario)
    if args.commands:
        return Scenario(environment=args.env or "env_a", commands=tuple(args.commands), name="adhoc")
    raise ConfigurationError("run needs --scenario or at least one --command")


def _summary_line(result: CommandResult) -> str:
    m = result.metrics
    wgsr = "n/a" if m.wgsr is None else f"{m.wgsr:.2f}%"
    return (f"{result.state.label}: path {m.path_length:.2f} m, execution {m.execution_time:.2f} s, "
            f"WGSR {wgsr}, replans {m.replan_attempts}, collision events {m.collision_events}")


def repl(env: EnvironmentMap, provider: WaypointProvider, settings: Settings,
         stdin: Optional[TextIO] = None, stdout: Optional[TextIO] = None) -> int:
    """Read one command per line and run it until 'quit' or end of input."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    navigator = Navigator(env, provider, settings.planner, settings.controller, settings.safety, settings.sim)
    stdout.write(f"corridor-nav on {env.name} with {provider.descriptor.label}; type 'help' for commands\n")
    count = 0
    while True:
        stdout.write("> ")
        stdout.flush()
        line = stdin.readline()
        if not line:
            break
        text = line.strip()
        if not text:
            continue
        word = text.split()[0].lower()
        if word in ("quit", "exit"):
            break
        if word == "help":
            stdout.write(REPL_HELP + "\n")
        elif word == "where":
            p = navigator.pose
            stdout.write(f"pose x={p.x:.3f} y={p.y:.3f} theta={p.theta:.3f}\n")
        elif word == "clear":
            env.clear_obstacles()
            stdout.write("obstacles cleared\n")
        elif word == "inject":
            try:
                x, y, r = (float(v) for v in text.split()[1:4])
                if r <= 0:
                    raise ValueError("radius must be positive")
            except ValueError as e:
                stdout.write(f"usage: inject x y r ({e})\n")
                continue
            env.inject_obstacle(Circle((x, y), r))
            stdout.write(f"obstacle at ({x:g}, {y:g}) r={r:g}\n")
        else:
            try:
                command = parse_command(text, env)
            except TargetResolutionError as e:
                stdout.write(f"{type(e).__name__}: {e}\n")
                if e.candidates:
                    stdout.write(f"known targets: {', '.join(e.candidates)}\n")
                continue
            count += 1
            result = navigator.run_command(command, count)
            stdout.write(_summary_line(result) + "\n")
            if result.metrics.replan_attempts:
                stdout.write(f"replanned {result.metrics.replan_attempts} time(s)\n")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        if args.action == "report":
            try:
                rebuild_reports(args.out_dir)
            except FileNotFoundError as e:
                raise ConfigurationError(str(e)) from e
            sys.stdout.write((Path(args.out_dir) / "aggregate.txt").read_text(encoding="utf-8"))
            return EXIT_OK

        settings = resolve_settings(args)
        if args.action == "run":
            scenario = _command_scenario(args)
            if args.seed is None:
                settings = replace(settings, llm=replace(settings.llm, seed=scenario.seed))
            provider = make_provider(args.provider, settings, args.stub_script)
            try:
                return run_scenario(scenario, provider, settings, Path(args.out_dir), args.continue_on_failure)
            finally:
                if isinstance(provider, LlmProvider):
                    provider.close()

        env = resolve_environment(args.env)
        provider = make_provider(args.provider, settings, args.stub_script)
        try:
            return repl(env, provider, settings)
        finally:
            if isinstance(provider, LlmProvider):
                provider.close()
    except ConfigurationError as e:
        logger.error(str(e))
        sys.stderr.write(f"configuration error: {e}\n")
        return EXIT_CONFIG
    except ProviderUnavailable as e:
        logger.error(str(e))
        sys.stderr.write(f"provider unavailable: {e}\n")
        return EXIT_PROVIDER


if __name__ == "__main__":
    sys.exit(main())
