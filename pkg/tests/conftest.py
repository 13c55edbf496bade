"""Shared pytest fixtures for corridor_nav tests."""

import json

import pytest

from corridor_nav.control import Pose
from corridor_nav.planning import Command, PlannerConfig
from corridor_nav.providers import OracleProvider, StubProvider
from corridor_nav.world import builtin_environment


@pytest.fixture
def env_a():
    """Fresh env_a map (tests may inject obstacles)."""
    return builtin_environment("env_a")


@pytest.fixture
def env_b():
    return builtin_environment("env_b")


@pytest.fixture
def env_c():
    return builtin_environment("env_c")


@pytest.fixture
def planner_cfg():
    return PlannerConfig()


@pytest.fixture
def origin():
    return Pose(0.0, 0.0, 0.0)


@pytest.fixture
def oracle():
    return OracleProvider()


@pytest.fixture
def window_command():
    return Command("go to the window", "Window", 0.0)


@pytest.fixture
def garbage_stub():
    """Stub that never returns a waypoint array."""
    return StubProvider(["I am sorry, I cannot help with that."])


@pytest.fixture
def waypoint_text():
    """Build provider text holding the given points as a JSON array."""
    def _make(points, prefix="", suffix=""):
        return prefix + json.dumps([{"x": x, "y": y} for x, y in points]) + suffix
    return _make
