"""Text-generation providers used to extract summaries and reflections."""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import httpx

from ._http import post_json
from .composer import estimate_tokens
from .core import LLMConfig
from .errors import ProviderFailure
from .reflection import StructuredReflection, render_reflection

GEN_API_KEY_ENV = "REFLECTMEM_GEN_API_KEY"


@dataclass(frozen=True)
class Generation:
    text: str
    prompt_tokens: int
    completion_tokens: int

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@runtime_checkable
class GenerationProvider(Protocol):
    name: str
    config: LLMConfig

    def generate(self, prompt: str) -> Generation: ...


@dataclass
class TokenUsage:
    """Thread-safe accumulator of measured provider token counts."""

    calls: int = 0
    prompt_tokens: int = 0
    total_tokens: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, gen: Generation) -> None:
        with self._lock:
            self.calls += 1
            self.prompt_tokens += gen.prompt_tokens
            self.total_tokens += gen.total_tokens


class EchoGenerator:
    """Returns the prompt unchanged. Useful for checking template filling."""

    def __init__(self, config: LLMConfig | None = None):
        self.name = "echo"
        self.config = config or LLMConfig()

    def generate(self, prompt: str) -> Generation:
        n = estimate_tokens(prompt)
        return Generation(prompt, n, n)


_SNAPSHOT_RE = re.compile(r"TRAJECTORY SNAPSHOT:\s*(.*)", re.S)
_FIELD_RE = r"^{name}:[ \t]*(.*)$"


def _field(prompt: str, name: str) -> str:
    m = re.search(_FIELD_RE.format(name=re.escape(name)), prompt, re.M)
    return m.group(1).strip() if m else ""


def _unique(items):
    seen = {}
    for item in items:
        seen.setdefault(item, None)
    return list(seen)


class HeuristicReflector:
    """Offline stand-in for an LLM.

    Reads the trajectory snapshot out of an extraction prompt and writes a
    reflection (or summary) from what it can see: the actions taken, repeated
    actions, and any ``Limitation:`` / ``Shortcut:`` notes the environment
    printed in its observations. Deterministic.
    """

    def __init__(self, config: LLMConfig | None = None):
        self.name = "heuristic-reflector"
        self.config = config or LLMConfig()

    def reflect(self, prompt: str) -> StructuredReflection:
        m = _SNAPSHOT_RE.search(prompt)
        snapshot = m.group(1) if m else ""
        success = _field(prompt, "SUCCESSFUL?") == "True"
        actions = re.findall(r"^ACTION:[ \t]*(.+)$", snapshot, re.M)
        limitations = _unique(s.strip().rstrip(".") for s in re.findall(r"Limitation:([^\n]*)", snapshot))
        shortcuts = _unique(s.strip().rstrip(".") for s in re.findall(r"Shortcut:([^\n]*)", snapshot))
        repeated = [a for a in _unique(actions) if actions.count(a) > 1]

        subgoals = [f'"{a}"' for a in _unique(actions) if a not in repeated] if success else []
        backtracking = [f'Repeating "{a}" had no effect; do not retry it.' for a in repeated]
        feedback = []
        if not success:
            if repeated:
                feedback.append(f'The attempt stalled on "{repeated[0]}". Look for another way to reach the same page.')
            else:
                feedback.append("The attempt did not reach the goal within the step budget.")
        return StructuredReflection(
            useful_subgoals=tuple(subgoals),
            backtracking_challenges=tuple(backtracking),
            limited_functionalities=tuple(f"Limitation: {s}." for s in limitations),
            shortcuts=tuple(f"Shortcut: {s}." for s in shortcuts),
            other_feedback=tuple(feedback) or ("Follow the same plan again.",),
        )

    def summarize(self, prompt: str) -> str:
        r = self.reflect(prompt)
        success = _field(prompt, "SUCCESSFUL?") == "True"
        parts = [f"The agent tried to: {_field(prompt, 'OBJECTIVE')}."]
        parts.append("It succeeded." if success else "It failed.")
        parts.extend(r.backtracking_challenges)
        parts.extend(r.limited_functionalities)
        parts.extend(r.shortcuts)
        return " ".join(parts)

    def generate(self, prompt: str) -> Generation:
        if "SUMMARY GUIDELINES" in prompt:
            text = self.summarize(prompt)
        else:
            text = render_reflection(self.reflect(prompt))
        return Generation(text, estimate_tokens(prompt), estimate_tokens(text))


class RemoteGenerator:
    """Client for an OpenAI-compatible ``POST {base_url}/chat/completions`` endpoint.

    ``temperature`` and ``top_p`` from ``config`` are forwarded on every request.
    The API key is read from ``$REFLECTMEM_GEN_API_KEY`` (optional).
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        config: LLMConfig | None = None,
        *,
        timeout_s: float = 60.0,
        max_attempts: int = 3,
        backoff_s: float = 0.5,
        api_key_env: str = GEN_API_KEY_ENV,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.name = f"remote:{model}"
        self.config = config or LLMConfig()
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def generate(self, prompt: str) -> Generation:
        key = os.environ.get(self.api_key_env)
        body = post_json(
            self._client,
            f"{self.base_url}/chat/completions",
            {
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": self.config.temperature,
                "top_p": self.config.top_p,
            },
            headers={"Authorization": f"Bearer {key}"} if key else {},
            max_attempts=self.max_attempts,
            backoff_s=self.backoff_s,
        )
        try:
            text = body["choices"][0]["message"]["content"] or ""
            usage = body.get("usage") or {}
            prompt_tokens = int(usage.get("prompt_tokens", estimate_tokens(prompt)))
            total = usage.get("total_tokens")
            completion = (
                int(total) - prompt_tokens
                if total is not None
                else int(usage.get("completion_tokens", estimate_tokens(text)))
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderFailure(f"malformed completion response: {exc}") from exc
        if prompt_tokens < 0 or completion < 0:
            raise ProviderFailure("provider reported negative token counts")
        return Generation(text, prompt_tokens, completion)

    def close(self) -> None:
        self._client.close()
