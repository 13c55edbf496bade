"""Pytest tests for waypoint providers without requiring a live model server."""

import json

import httpx
import pytest

from corridor_nav.exceptions import ConfigurationError, ParseFailure, ProviderError, ProviderUnavailable
from corridor_nav.planning import PromptPair, build_prompts, parse_waypoints
from corridor_nav.providers import (
    LlmEndpointConfig,
    LlmProvider,
    OracleProvider,
    StubProvider,
    WaypointProvider,
    extract_content,
    llm_generate,
    stub_provider,
)
from corridor_nav.world import Circle

REPLY = '[{"x": 7.0, "y": 0.0}, {"x": 13.45, "y": 0.0}]'


@pytest.fixture
def prompts():
    return PromptPair("system text", "user text")


@pytest.fixture
def llm_cfg():
    return LlmEndpointConfig(base_url="http://model-host:11434/", model_name="test-model", seed=42)


def make_llm(cfg, handler):
    return LlmProvider(cfg, transport=httpx.MockTransport(handler))


class TestExtractContent:

    def test_chat_body(self):
        assert extract_content({"message": {"role": "assistant", "content": "hi"}}) == "hi"

    def test_choices_body(self):
        assert extract_content({"choices": [{"message": {"content": "hi"}}]}) == "hi"

    @pytest.mark.parametrize("body", [{}, [], {"message": {"content": 3}}, {"choices": []}, "text"])
    def test_missing_content(self, body):
        with pytest.raises(ParseFailure):
            extract_content(body)


class TestLlmProvider:
    """Chat-completion client over a mocked transport."""

    def test_request_shape(self, llm_cfg, prompts):
        # Arrange
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"message": {"role": "assistant", "content": REPLY}})

        # Act
        with make_llm(llm_cfg, handler) as llm:
            text = llm.generate(prompts, timeout=5.0)

        # Assert
        assert text == REPLY
        assert seen["url"] == "http://model-host:11434/api/chat"
        body = seen["body"]
        assert body["model"] == "test-model"
        assert body["stream"] is False
        assert body["options"] == {"temperature": 0.0, "seed": 42}
        assert body["messages"] == [
            {"role": "system", "content": "system text"},
            {"role": "user", "content": "user text"},
        ]

    def test_seed_omitted(self, prompts):
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"message": {"content": "[]"}})

        with make_llm(LlmEndpointConfig(seed=None), handler) as llm:
            llm.generate(prompts, timeout=5.0)
        assert "seed" not in seen["body"]["options"]

    def test_openai_style_response(self, llm_cfg, prompts):
        handler = lambda request: httpx.Response(200, json={"choices": [{"message": {"content": REPLY}}]})
        with make_llm(llm_cfg, handler) as llm:
            assert parse_waypoints(llm.generate(prompts, timeout=5.0)) == [(7.0, 0.0), (13.45, 0.0)]

    @pytest.mark.parametrize("status", [400, 404, 500, 503])
    def test_http_error(self, llm_cfg, prompts, status):
        handler = lambda request: httpx.Response(status, text="model not loaded")
        with make_llm(llm_cfg, handler) as llm:
            with pytest.raises(ProviderError, match=f"HTTP {status}") as exc_info:
                llm.generate(prompts, timeout=5.0)
        assert exc_info.value.status == status
        assert exc_info.value.body == "model not loaded"

    def test_non_json_body(self, llm_cfg, prompts):
        handler = lambda request: httpx.Response(200, text="<html>proxy</html>")
        with make_llm(llm_cfg, handler) as llm:
            with pytest.raises(ParseFailure, match="not JSON"):
                llm.generate(prompts, timeout=5.0)

    @pytest.mark.parametrize("error", [
        httpx.ConnectError("connection refused"),
        httpx.ReadTimeout("timed out"),
        httpx.ConnectTimeout("timed out"),
    ])
    def test_transport_failures_are_unavailable(self, llm_cfg, prompts, error):
        def handler(request):
            raise error

        with make_llm(llm_cfg, handler) as llm:
            with pytest.raises(ProviderUnavailable):
                llm.generate(prompts, timeout=5.0)

    def test_debug_logging(self, llm_cfg, prompts, caplog):
        handler = lambda request: httpx.Response(200, json={"message": {"content": REPLY}})
        with caplog.at_level("DEBUG", logger="corridor_nav.providers"):
            with make_llm(llm_cfg, handler) as llm:
                llm.generate(prompts, timeout=5.0)
        assert "REQUEST TO MODEL" in caplog.text
        assert "RESPONSE FROM MODEL" in caplog.text

    def test_descriptor_and_repr(self, llm_cfg):
        llm = LlmProvider(llm_cfg)
        try:
            assert llm.descriptor.label == "llm(test-model)"
            assert llm.descriptor.endpoint == llm_cfg.base_url
            assert repr(llm) == "LlmProvider(url='http://model-host:11434/', model='test-model')"
            assert isinstance(llm, WaypointProvider)
        finally:
            llm.close()

    @pytest.mark.parametrize("kwargs", [{"base_url": ""}, {"request_timeout": 0}, {"temperature": -1}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ConfigurationError):
            LlmEndpointConfig(**kwargs)


class TestLlmGenerate:
    """One-shot requests through a short-lived client."""

    def test_returns_reply_and_closes_client(self, llm_cfg, prompts, mocker):
        # Arrange
        generate = mocker.patch.object(LlmProvider, "generate", return_value=REPLY)
        close = mocker.spy(LlmProvider, "close")

        # Act
        text = llm_generate(llm_cfg, prompts)

        # Assert
        assert text == REPLY
        generate.assert_called_once_with(prompts, llm_cfg.request_timeout)
        assert close.call_count == 1

    def test_failure_still_closes_client(self, llm_cfg, prompts, mocker):
        mocker.patch.object(LlmProvider, "generate", side_effect=ProviderUnavailable("refused"))
        close = mocker.spy(LlmProvider, "close")
        with pytest.raises(ProviderUnavailable):
            llm_generate(llm_cfg, prompts)
        assert close.call_count == 1


class TestOracleProvider:

    def test_serves_parseable_plan(self, env_a, origin, planner_cfg, oracle):
        prompts = build_prompts(env_a, origin, env_a.object("Window"), planner_cfg)
        points = parse_waypoints(oracle.generate(prompts, timeout=1.0))
        assert points[-1] == (13.45, 0.0)
        assert oracle.descriptor.label == "oracle"

    def test_no_route_gives_empty_array(self, env_a, origin, planner_cfg, oracle):
        """A blocked corridor is answered with [] so validation reports it like any bad answer."""
        prompts = build_prompts(env_a, origin, env_a.object("Window"), planner_cfg,
                                obstacles=[Circle((7.0, 0.0), 2.5)], clearance=0.5)
        assert oracle.generate(prompts, timeout=1.0) == "[]"

    def test_needs_structured_request(self, oracle, prompts):
        with pytest.raises(ConfigurationError):
            oracle.generate(prompts, timeout=1.0)


class TestStubProvider:
    """Scripted responses."""

    def test_replays_then_repeats_last(self, prompts):
        stub = StubProvider(["a", "b"])
        assert [stub.generate(prompts, 1.0) for _ in range(4)] == ["a", "b", "b", "b"]
        assert len(stub.calls) == 4

    def test_raises_exception_entries(self, prompts):
        stub = StubProvider([ProviderUnavailable("down"), "ok"])
        with pytest.raises(ProviderUnavailable):
            stub.generate(prompts, 1.0)
        assert stub.generate(prompts, 1.0) == "ok"

    def test_empty_script(self):
        with pytest.raises(ConfigurationError):
            StubProvider([])

    def test_protocol(self, garbage_stub, oracle):
        assert isinstance(garbage_stub, WaypointProvider)
        assert isinstance(oracle, WaypointProvider)

    def test_factory(self, prompts):
        stub = stub_provider(["only"])
        assert stub.descriptor.label == "stub"
        assert stub.generate(prompts, 1.0) == "only"
