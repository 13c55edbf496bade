"""Settings bundle: defaults, optional JSON overrides file, then environment variables."""

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .control import ControllerConfig
from .exceptions import ConfigurationError
from .navigator import SimConfig
from .planning import PlannerConfig
from .providers import LlmEndpointConfig
from .safety import SafetyConfig

logger = logging.getLogger(__name__)

ENV_LLM_URL = "NAV_LLM_URL"
ENV_LLM_MODEL = "NAV_LLM_MODEL"

_SECTIONS = {
    "planner": PlannerConfig,
    "controller": ControllerConfig,
    "safety": SafetyConfig,
    "sim": SimConfig,
    "llm": LlmEndpointConfig,
}


@dataclass(frozen=True)
class Settings:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    llm: LlmEndpointConfig = field(default_factory=LlmEndpointConfig)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Settings":
        """Settings with per-section overrides; unknown sections or keys are rejected."""
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigurationError(f"Unknown settings sections: {sorted(unknown)}")
        sections = {}
        for name, section_cls in _SECTIONS.items():
            overrides = data.get(name, {})
            if not isinstance(overrides, Mapping):
                raise ConfigurationError(f"Settings section '{name}' must be an object")
            allowed = {f.name for f in fields(section_cls)}
            bad = set(overrides) - allowed
            if bad:
                raise ConfigurationError(f"Unknown keys in '{name}': {sorted(bad)}")
            try:
                sections[name] = section_cls(**overrides)
            except TypeError as e:
                raise ConfigurationError(f"Invalid '{name}' settings: {e}") from e
        return cls(**sections)

    def with_env(self, environ: Optional[Mapping[str, str]] = None) -> "Settings":
        environ = os.environ if environ is None else environ
        llm = self.llm
        if environ.get(ENV_LLM_URL):
            llm = replace(llm, base_url=environ[ENV_LLM_URL])
        if environ.get(ENV_LLM_MODEL):
            llm = replace(llm, model_name=environ[ENV_LLM_MODEL])
        return replace(self, llm=llm)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in _SECTIONS:
            section = getattr(self, name)
            out[name] = {f.name: _plain(getattr(section, f.name)) for f in fields(section)}
        return out


def _plain(value: Any) -> Any:
    return dict(value) if isinstance(value, Mapping) else value


def load_settings(path: Optional[Union[str, Path]] = None, environ: Optional[Mapping[str, str]] = None) -> Settings:
    """Defaults, then the JSON file at ``path`` if given, then environment variables."""
    settings = Settings()
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigurationError(f"Settings file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Settings file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"Settings file {path} must hold a JSON object")
        settings = Settings.from_dict(data)
        logger.debug(f"Loaded settings overrides from {path}")
    return settings.with_env(environ)
