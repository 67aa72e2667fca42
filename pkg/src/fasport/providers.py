"""Chat-completion providers for the heuristic-evolution engine.

Three flavours: a scripted mock (deterministic tests), a recorded-fixture
replayer, and a real HTTP chat-completions client. All expose
complete(system, user) -> response text.
"""

import json
import os
import time

import requests

from .errors import ConfigError, ProviderError


def native_response(native_id: str, idea: str | None = None) -> str:
    """Response text that parses into a native-heuristic candidate."""
    idea = idea or f"Use the built-in {native_id} strategy."
    return f"{idea}\n```\nnative: {native_id}\n```\n"


class MockProvider:
    """Replays a scripted response list; the last entry repeats forever."""

    def __init__(self, responses):
        responses = list(responses)
        if not responses:
            raise ConfigError("mock provider needs at least one response")
        self.responses = responses
        self.calls = 0

    def complete(self, system: str, user: str) -> str:
        idx = min(self.calls, len(self.responses) - 1)
        self.calls += 1
        return self.responses[idx]


class FixtureProvider:
    """Replays recorded responses byte-for-byte, in order, from a JSON file."""

    def __init__(self, path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict) or "responses" not in doc:
            raise ConfigError(f"fixture file {path} must hold {{\"responses\": [...]}}")
        self.responses = list(doc["responses"])
        self.calls = 0

    def complete(self, system: str, user: str) -> str:
        if self.calls >= len(self.responses):
            raise ProviderError("fixture exhausted")
        resp = self.responses[self.calls]
        self.calls += 1
        return resp


class HttpProvider:
    """Chat-completions-compatible HTTP endpoint."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 api_key_env: str | None = None, timeout_s: float = 120.0):
        if api_key is None and api_key_env:
            api_key = os.environ.get(api_key_env)
            if api_key is None:
                raise ConfigError(f"environment variable {api_key_env} is not set")
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s

    def complete(self, system: str, user: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model,
                "messages": [{"role": "system", "content": system},
                             {"role": "user", "content": user}]}
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers,
                                 timeout=self.timeout_s)
            resp.raise_for_status()
            doc = resp.json()
            return doc["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc


def call_with_retries(provider, system: str, user: str, retries: int = 3,
                      backoff_s: float = 1.0) -> str:
    """Up to `retries` attempts with exponential backoff."""
    delay = backoff_s
    last = None
    for attempt in range(retries):
        try:
            return provider.complete(system, user)
        except ProviderError as exc:
            last = exc
            if attempt + 1 < retries and delay > 0:
                time.sleep(delay)
                delay *= 2
    raise ProviderError(f"provider failed after {retries} attempts: {last}")
