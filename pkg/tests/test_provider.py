import json

import httpx
import pytest

from conftest import script_path
from threatagent.provider import (
    API_KEY_ENV,
    Exhausted,
    FakeClock,
    ProviderError,
    RemoteProvider,
    RemoteRefusal,
    ScriptEntry,
    ScriptedProvider,
    SystemClock,
)


class TestScriptedProvider:
    def test_replays_in_order_deterministically(self):
        entries = [ScriptEntry("first"), ScriptEntry("second")]
        for _ in range(3):
            p = ScriptedProvider(entries, clock=FakeClock())
            assert p.complete("hi").response_text == "first"
            assert p.complete("hi").response_text == "second"

    def test_injected_delay_bounds_latency(self):
        p = ScriptedProvider([ScriptEntry("ok", injected_delay_ms=100)],
                             clock=SystemClock())
        exchange = p.complete("request")
        assert exchange.response_text == "ok"
        assert 100 <= exchange.latency_ms <= 150

    def test_fake_clock_latency_equals_delay(self):
        p = ScriptedProvider([ScriptEntry("ok", injected_delay_ms=250)],
                             clock=FakeClock())
        assert p.complete("r").latency_ms == 250

    def test_empty_script_exhausted_after_one_attempt(self):
        p = ScriptedProvider([], clock=FakeClock())
        with pytest.raises(Exhausted) as exc:
            p.complete("anything")
        assert exc.value.attempts == 1

    def test_match_entry_fires_only_on_substring(self):
        p = ScriptedProvider([
            ScriptEntry("for-repair", match="re-emit"),
            ScriptEntry("fallback"),
        ], clock=FakeClock())
        assert p.complete("please generate").response_text == "fallback"

    def test_loads_fixture_script(self):
        p = ScriptedProvider.from_script_file(script_path("one_repair.json"),
                                              clock=FakeClock())
        first = p.complete("go")
        assert "threatmodel-json" not in first.response_text
        assert "threatmodel-json" in p.complete("go").response_text

    def test_empty_prompt_rejected(self):
        with pytest.raises(ProviderError):
            ScriptedProvider([ScriptEntry("x")]).complete("")


def _remote(handler, retries=2, key="test-key"):
    return RemoteProvider(
        "https://llm.invalid/v1/generate", api_key=key,
        retries=retries, clock=FakeClock(),
        transport=httpx.MockTransport(handler))


class TestRemoteProvider:
    def test_success_extracts_first_candidate_text(self):
        def handler(request):
            body = json.loads(request.content)
            assert body["contents"][0]["parts"][0]["text"] == "hello"
            return httpx.Response(200, json={
                "candidates": [{"content": {"parts": [{"text": "world"}]}}]})
        exchange = _remote(handler).complete("hello")
        assert exchange.response_text == "world"
        assert exchange.attempt == 1
        assert exchange.provider_name == "remote"

    def test_transport_errors_retried_then_exhausted(self):
        calls = []

        def handler(request):
            calls.append(1)
            raise httpx.ConnectError("unreachable")
        with pytest.raises(Exhausted) as exc:
            _remote(handler, retries=2).complete("x")
        assert exc.value.attempts == 3
        assert len(calls) == 3

    def test_retry_then_success_counts_attempts(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) < 2:
                raise httpx.ConnectError("blip")
            return httpx.Response(200, json={
                "candidates": [{"content": {"parts": [{"text": "ok"}]}}]})
        exchange = _remote(handler).complete("x")
        assert exchange.attempt == 2

    def test_non_success_status_is_refusal(self):
        def handler(request):
            return httpx.Response(429, text="slow down")
        with pytest.raises(RemoteRefusal) as exc:
            _remote(handler).complete("x")
        assert exc.value.status == 429
        assert "slow down" in exc.value.body

    def test_missing_api_key_names_env_var(self, monkeypatch):
        monkeypatch.delenv(API_KEY_ENV, raising=False)
        with pytest.raises(ProviderError, match=API_KEY_ENV):
            RemoteProvider("https://llm.invalid/gen", api_key=None)
