"""Chat-completion clients."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx

from ..errors import PreconditionError, ToolFailure

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
API_KEY_ENV = "PROGRAG_API_KEY"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown chat role {self.role!r}")
        if self.role != "assistant" and not self.content.strip():
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class GenerationParams:
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout_s: float = 120.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class PromptTag:
    """Which template produced a request, plus its distinguishing input.

    Remote clients ignore it; the replay client keys its script on it.
    """

    template_id: str
    key: str

    @property
    def fingerprint(self) -> str:
        return f"{self.template_id}:{self.key[:64]}"


class ChatClient(Protocol):
    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams, tag: PromptTag | None = None) -> str: ...


def check_messages(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise PreconditionError("chat needs at least one message")
    if messages[0].role != "system":
        raise PreconditionError("the first chat message must have role 'system'")


def _snippet(body: bytes) -> str:
    return body[:200].decode("utf-8", errors="replace")


class HttpChatClient:
    """Client for an OpenAI-style ``/chat/completions`` endpoint."""

    def __init__(
        self,
        url: str,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.client = client or httpx.Client(transport=transport)

    def __repr__(self) -> str:
        return f"HttpChatClient(url={self.url!r})"

    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams, tag: PromptTag | None = None) -> str:
        check_messages(messages)
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        payload = {
            "model": params.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        log.debug("chat request to %s model=%s messages=%d", self.url, params.model, len(messages))
        try:
            response = self.client.post(self.url, json=payload, headers=headers, timeout=params.timeout_s)
        except httpx.TimeoutException as exc:
            raise ToolFailure(f"chat request to {self.url} timed out after {params.timeout_s:g} s") from exc
        except httpx.HTTPError as exc:
            raise ToolFailure(f"chat request to {self.url} failed: {type(exc).__name__}") from exc
        body = response.content
        if not 200 <= response.status_code < 300:
            raise ToolFailure(f"chat endpoint returned HTTP {response.status_code}: {_snippet(body)}")
        try:
            data = response.json()
        except ValueError:
            raise ToolFailure(f"chat endpoint returned invalid JSON (schema): {_snippet(body)}") from None
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ToolFailure(f"chat response lacks choices[0].message.content (schema): {_snippet(body)}") from None
        if not isinstance(content, str):
            raise ToolFailure(f"chat response content is not text (schema): {_snippet(body)}")
        return content
