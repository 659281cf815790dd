"""LLM backends: a Gemini-style remote HTTP client and a scripted test
double, both recording latency and attempt metadata per exchange.

Time is injected through a Clock so scripted runs can be made fully
deterministic (fixed timestamps, latency == injected delay).
"""

from __future__ import annotations

import json
import os
import threading
import time as _time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Optional, Protocol

import httpx

API_KEY_ENV = "THREATGPT_API_KEY"


class ProviderError(Exception):
    pass


class Timeout(ProviderError):
    pass


class RemoteRefusal(ProviderError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"provider returned status {status}")


class Exhausted(ProviderError):
    def __init__(self, attempts: int, last_error: Optional[str] = None):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(
            f"provider exhausted after {attempts} attempt(s)"
            + (f": {last_error}" if last_error else ""))


class Clock(Protocol):
    def now(self) -> datetime: ...
    def monotonic(self) -> float: ...
    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def monotonic(self) -> float:
        return _time.monotonic()

    def sleep(self, seconds: float) -> None:
        _time.sleep(seconds)


class FakeClock:
    """Deterministic clock: sleep() advances time instead of waiting."""

    def __init__(self, start: str = "2025-01-01T00:00:00Z"):
        self._base = datetime.fromisoformat(start.replace("Z", "+00:00"))
        self._elapsed = 0.0

    def now(self) -> datetime:
        return self._base + timedelta(seconds=self._elapsed)

    def monotonic(self) -> float:
        return self._elapsed

    def sleep(self, seconds: float) -> None:
        self._elapsed += seconds


def rfc3339(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class ProviderExchange:
    request_text: str
    response_text: str
    latency_ms: int
    attempt: int
    provider_name: str
    completed_at: str  # RFC 3339


@dataclass(frozen=True)
class ScriptEntry:
    response_text: str
    match: Optional[str] = None
    injected_delay_ms: int = 0


class ScriptedProvider:
    """Replays configured responses in order; never retries.

    A match-bearing entry fires only when its substring occurs in the
    request; non-matching entries are passed over (consumed).
    """

    name = "scripted"

    def __init__(self, entries: list[ScriptEntry], clock: Optional[Clock] = None):
        self._entries = list(entries)
        self._cursor = 0
        self._lock = threading.Lock()
        self._clock = clock or SystemClock()

    @classmethod
    def from_script(cls, document: str, clock: Optional[Clock] = None
                    ) -> "ScriptedProvider":
        doc = json.loads(document)
        entries = [
            ScriptEntry(
                response_text=e["response"],
                match=e.get("match"),
                injected_delay_ms=int(e.get("delay_ms", 0)),
            )
            for e in doc["responses"]
        ]
        return cls(entries, clock=clock)

    @classmethod
    def from_script_file(cls, path, clock: Optional[Clock] = None
                         ) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as f:
            return cls.from_script(f.read(), clock=clock)

    def complete(self, prompt: str) -> ProviderExchange:
        if not prompt:
            raise ProviderError("prompt must be non-empty")
        with self._lock:
            entry = None
            while self._cursor < len(self._entries):
                candidate = self._entries[self._cursor]
                self._cursor += 1
                if candidate.match is None or candidate.match in prompt:
                    entry = candidate
                    break
            if entry is None:
                raise Exhausted(attempts=1, last_error="script exhausted")
            started = self._clock.monotonic()
            if entry.injected_delay_ms:
                self._clock.sleep(entry.injected_delay_ms / 1000.0)
            latency_ms = int(round((self._clock.monotonic() - started) * 1000))
            return ProviderExchange(
                request_text=prompt,
                response_text=entry.response_text,
                latency_ms=latency_ms,
                attempt=1,
                provider_name=self.name,
                completed_at=rfc3339(self._clock.now()),
            )


class RemoteProvider:
    """Generate-content style HTTP client: one text part in, first
    candidate's text out. Transport failures are retried with backoff."""

    name = "remote"

    def __init__(self, endpoint: str, api_key: Optional[str] = None,
                 deadline_s: float = 60.0, retries: int = 2,
                 clock: Optional[Clock] = None,
                 transport: Optional[httpx.BaseTransport] = None):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise ProviderError(f"API key missing: set {API_KEY_ENV}")
        self.deadline_s = deadline_s
        self.retries = retries
        self._clock = clock or SystemClock()
        self._client = httpx.Client(timeout=deadline_s, transport=transport)

    def complete(self, prompt: str) -> ProviderExchange:
        if not prompt:
            raise ProviderError("prompt must be non-empty")
        body = {"contents": [{"parts": [{"text": prompt}]}]}
        headers = {"x-goog-api-key": self.api_key,
                   "content-type": "application/json"}
        last_error: Optional[str] = None
        attempts = 0
        started = self._clock.monotonic()
        for attempt in range(1 + self.retries):
            attempts = attempt + 1
            try:
                resp = self._client.post(self.endpoint, json=body, headers=headers)
            except httpx.TimeoutException as e:
                raise Timeout(str(e)) from e
            except httpx.TransportError as e:
                last_error = str(e)
                if attempt < self.retries:
                    self._clock.sleep(float(2 ** attempt))  # 1 s then 2 s
                continue
            if resp.status_code != 200:
                raise RemoteRefusal(resp.status_code, resp.text)
            latency_ms = int(round((self._clock.monotonic() - started) * 1000))
            return ProviderExchange(
                request_text=prompt,
                response_text=self._extract_text(resp.json()),
                latency_ms=latency_ms,
                attempt=attempts,
                provider_name=self.name,
                completed_at=rfc3339(self._clock.now()),
            )
        raise Exhausted(attempts=attempts, last_error=last_error)

    @staticmethod
    def _extract_text(payload: dict) -> str:
        try:
            parts = payload["candidates"][0]["content"]["parts"]
            return "".join(p.get("text", "") for p in parts)
        except (KeyError, IndexError, TypeError):
            return ""
