"""Scripted command sequences with optional obstacle injections."""

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, List, Tuple, Union

from .exceptions import ConfigurationError
from .navigator import ObstacleInjection

logger = logging.getLogger(__name__)

BUILTIN_SCENARIOS = ("env_a_table1", "env_b_table1", "env_c_table1", "env_b_obstacle", "env_a_blocked")


@dataclass(frozen=True)
class Scenario:
    environment: str
    commands: Tuple[str, ...]
    obstacle_script: Tuple[ObstacleInjection, ...] = ()
    seed: int = 0
    name: str = "scenario"
    continue_on_failure: bool = False

    def __post_init__(self) -> None:
        if not self.commands:
            raise ConfigurationError(f"Scenario {self.name} has no commands")
        for inj in self.obstacle_script:
            if not 1 <= inj.command <= len(self.commands):
                raise ConfigurationError(f"Scenario {self.name}: obstacle refers to command {inj.command}")
            if inj.radius <= 0 or inj.at < 0:
                raise ConfigurationError(f"Scenario {self.name}: obstacle needs radius > 0 and at >= 0")


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    try:
        obstacles: List[ObstacleInjection] = [
            ObstacleInjection(
                command=int(o.get("command", 1)),
                at=float(o.get("at", 0.0)),
                x=float(o["x"]),
                y=float(o["y"]),
                radius=float(o["radius"]),
                until=None if o.get("until") is None else float(o["until"]),
            )
            for o in data.get("obstacles", [])
        ]
        commands = data["commands"]
        if not isinstance(commands, list) or not all(isinstance(c, str) for c in commands):
            raise ConfigurationError("Scenario 'commands' must be a list of strings")
        return Scenario(
            environment=str(data["environment"]),
            commands=tuple(commands),
            obstacle_script=tuple(obstacles),
            seed=int(data.get("seed", 0)),
            name=str(data.get("name", "scenario")),
            continue_on_failure=bool(data.get("continue_on_failure", False)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"Malformed scenario document: {e}") from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Scenario from a JSON file, or a shipped scenario by name."""
    if str(path) in BUILTIN_SCENARIOS:
        return builtin_scenario(str(path))
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigurationError(f"Scenario file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Scenario file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Scenario file {path} must hold a JSON object")
    return scenario_from_dict(data)


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise ConfigurationError(f"Unknown scenario '{name}', expected one of {BUILTIN_SCENARIOS}")
    text = resources.files("corridor_nav").joinpath("data", "scenarios", f"{name}.json").read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text))
