"""Waypoint providers: the local LLM endpoint, the geometric oracle and scripted stubs."""

import json
import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Protocol, Sequence, Union, runtime_checkable

import httpx

from .exceptions import ConfigurationError, ParseFailure, ProviderError, ProviderUnavailable, ValidationError
from .planning import PromptPair, oracle_plan, serialize_waypoints

logger = logging.getLogger(__name__)

DEFAULT_LLM_URL = "http://localhost:11434"
DEFAULT_MODEL = "llama3.1"


@dataclass(frozen=True)
class ProviderDescriptor:
    kind: str
    endpoint: Optional[str] = None
    model_name: Optional[str] = None

    @property
    def label(self) -> str:
        return f"{self.kind}({self.model_name})" if self.model_name else self.kind


@runtime_checkable
class WaypointProvider(Protocol):
    descriptor: ProviderDescriptor

    def generate(self, prompts: PromptPair, timeout: float) -> str:
        ...


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str = DEFAULT_LLM_URL
    model_name: str = DEFAULT_MODEL
    temperature: float = 0.0
    request_timeout: float = 60.0
    seed: Optional[int] = 0

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ConfigurationError("LlmEndpointConfig.base_url must not be empty")
        if self.request_timeout <= 0:
            raise ConfigurationError("LlmEndpointConfig.request_timeout must be positive")
        if self.temperature < 0:
            raise ConfigurationError("LlmEndpointConfig.temperature must not be negative")


def extract_content(body: Any) -> str:
    """Assistant text from an /api/chat body or an OpenAI-style ``choices`` body."""
    if isinstance(body, dict):
        message = body.get("message")
        if isinstance(message, dict) and isinstance(message.get("content"), str):
            return message["content"]
        choices = body.get("choices")
        if isinstance(choices, list) and choices and isinstance(choices[0], dict):
            message = choices[0].get("message")
            if isinstance(message, dict) and isinstance(message.get("content"), str):
                return message["content"]
    raise ParseFailure("Provider response carries no message content")


class LlmProvider:
    """Chat-completion client for a local model server.

    One instance keeps an httpx.Client open; use it as a context manager or
    call close() when done.
    """

    def __init__(self, cfg: LlmEndpointConfig, transport: Optional[httpx.BaseTransport] = None) -> None:
        self.cfg = cfg
        self.descriptor = ProviderDescriptor("llm", cfg.base_url, cfg.model_name)
        self._client = httpx.Client(timeout=cfg.request_timeout, transport=transport)

    @property
    def url(self) -> str:
        return f"{self.cfg.base_url.rstrip('/')}/api/chat"

    def _payload(self, prompts: PromptPair) -> dict[str, Any]:
        options: dict[str, Any] = {"temperature": self.cfg.temperature}
        if self.cfg.seed is not None:
            options["seed"] = self.cfg.seed
        return {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": prompts.system_prompt},
                {"role": "user", "content": prompts.user_prompt},
            ],
            "stream": False,
            "options": options,
        }

    def _log_request(self, payload: dict) -> None:
        logger.debug("REQUEST TO MODEL:\n%s", json.dumps(payload, indent=2))

    def _log_response(self, body: Any) -> None:
        logger.debug("RESPONSE FROM MODEL:\n%s", json.dumps(body, indent=2) if not isinstance(body, str) else body)

    def generate(self, prompts: PromptPair, timeout: float) -> str:
        """POST the prompt pair and return the assistant text.

        Args:
            prompts: System and user prompt
            timeout: Per-request timeout in seconds

        Returns:
            Raw assistant text, not yet parsed

        Raises:
            ProviderUnavailable: Connection refused or timed out
            ProviderError: HTTP status >= 400
            ParseFailure: Body is not JSON or carries no message content
        """
        payload = self._payload(prompts)
        self._log_request(payload)
        try:
            response = self._client.post(self.url, json=payload, timeout=timeout)
        except httpx.TimeoutException as e:
            logger.error(f"Request to {self.url} timed out after {timeout}s")
            raise ProviderUnavailable(f"Timed out after {timeout}s waiting for {self.url}") from e
        except httpx.TransportError as e:
            logger.error(f"Cannot reach {self.url}: {e}")
            raise ProviderUnavailable(f"Cannot reach {self.url}: {e}") from e

        if response.status_code >= 400:
            logger.error(f"Model server answered HTTP {response.status_code}")
            raise ProviderError(response.status_code, response.text)
        try:
            body = response.json()
        except ValueError as e:
            self._log_response(response.text)
            raise ParseFailure(f"Provider body is not JSON: {response.text[:200]}") from e
        self._log_response(body)
        return extract_content(body)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "LlmProvider":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()

    def __repr__(self) -> str:
        return f"LlmProvider(url='{self.cfg.base_url}', model='{self.cfg.model_name}')"


def llm_generate(cfg: LlmEndpointConfig, prompts: PromptPair) -> str:
    """One-shot request through a short-lived client."""
    with LlmProvider(cfg) as provider:
        return provider.generate(prompts, cfg.request_timeout)


class OracleProvider:
    """Serves the deterministic geometric plan in the same JSON format the model returns."""

    def __init__(self) -> None:
        self.descriptor = ProviderDescriptor("oracle")

    def generate(self, prompts: PromptPair, timeout: float) -> str:
        request = prompts.request
        if request is None:
            raise ConfigurationError("Oracle provider needs a structured planning request")
        try:
            points = oracle_plan(request.env, request.pose, request.target, request.cfg,
                                 request.obstacles, request.clearance)
        except ValidationError as e:
            # no route: answer with an empty list so validation reports it
            logger.warning(f"Oracle found no route: {e}")
            return "[]"
        return serialize_waypoints(points)

    def __repr__(self) -> str:
        return "OracleProvider()"


class StubProvider:
    """Replays scripted responses, repeating the last one once the script runs out.

    A script entry that is an exception instance is raised instead of returned.
    """

    def __init__(self, script: Sequence[Union[str, BaseException]]) -> None:
        if not script:
            raise ConfigurationError("Stub provider script must not be empty")
        self.descriptor = ProviderDescriptor("stub")
        self._script: List[Union[str, BaseException]] = list(script)
        self._cursor = 0
        self.calls: List[PromptPair] = []

    def generate(self, prompts: PromptPair, timeout: float) -> str:
        self.calls.append(prompts)
        entry = self._script[min(self._cursor, len(self._script) - 1)]
        self._cursor += 1
        if isinstance(entry, BaseException):
            raise entry
        return entry

    def __repr__(self) -> str:
        return f"StubProvider(entries={len(self._script)}, served={self._cursor})"


def stub_provider(script: Sequence[Union[str, BaseException]]) -> StubProvider:
    return StubProvider(script)
