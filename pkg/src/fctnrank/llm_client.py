"""Chat-completion transport: an HTTP backend, a scripted mock and token budgeting."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .errors import ClientUnavailable, ContextOverflow, ProtocolError, ScriptExhausted

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be nonempty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass
class Conversation:
    messages: list[ChatMessage] = field(default_factory=list)

    def append(self, message: ChatMessage) -> None:
        if not self.messages and message.role != "system":
            raise ValueError("a conversation must open with a system message")
        self.messages.append(message)

    @property
    def token_estimate(self) -> int:
        return sum(estimate_tokens(m.content) for m in self.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def to_list(self) -> list[dict]:
        return [m.to_dict() for m in self.messages]


@dataclass
class ClientParams:
    model_name: str = "gpt-4o"
    max_output_tokens: int = 3000
    temperature: float = 1.0
    context_window_tokens: int = 128_000
    timeout_ms: int = 120_000
    max_retries: int = 3
    backoff_s: float = 1.0

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.context_window_tokens <= self.max_output_tokens:
            raise ValueError("context_window_tokens must exceed max_output_tokens")


def token_budget_check(conversation: Conversation | Sequence[ChatMessage], params: ClientParams) -> tuple[int, bool]:
    """Projected prompt+completion tokens (chars/4, rounded up per message) and whether it fits."""
    msgs = conversation.messages if isinstance(conversation, Conversation) else conversation
    projected = sum(estimate_tokens(m.content) for m in msgs) + params.max_output_tokens
    return projected, projected <= params.context_window_tokens


def _check_budget(conversation, params):
    projected, ok = token_budget_check(conversation, params)
    if not ok:
        raise ContextOverflow(
            f"projected {projected} tokens exceeds the {params.context_window_tokens}-token context window"
        )


class ChatClient:
    """Interface: ``send`` returns one assistant message and never mutates its input."""

    def send(self, conversation: Conversation, params: ClientParams) -> ChatMessage:
        raise NotImplementedError


class ScriptedClient(ChatClient):
    """Deterministic mock that replays canned responses in order."""

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self.position = 0
        self.received: list[list[dict]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedClient":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list) or not all(isinstance(s, str) for s in data):
            raise ValueError(f"{path}: mock script must be a JSON array of strings")
        return cls(data)

    def send(self, conversation, params):
        _check_budget(conversation, params)
        self.received.append(conversation.to_list())
        if self.position >= len(self.responses):
            raise ScriptExhausted(f"mock script exhausted after {len(self.responses)} responses")
        text = self.responses[self.position]
        self.position += 1
        return ChatMessage("assistant", text)


_TRANSIENT_STATUS = {408, 409, 429, 500, 502, 503, 504}


class HttpChatClient(ChatClient):
    """POSTs the conversation to an OpenAI-style chat-completions endpoint.

    The API key is read from the environment variable ``api_key_env`` at
    send time and is never logged.
    """

    def __init__(self, endpoint: str, api_key_env: str | None = "OPENAI_API_KEY", session: requests.Session | None = None):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env) if self.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def send(self, conversation, params):
        _check_budget(conversation, params)
        body = {
            "model": params.model_name,
            "messages": conversation.to_list(),
            "max_tokens": params.max_output_tokens,
            "temperature": params.temperature,
        }
        last_exc = None
        for attempt in range(params.max_retries + 1):
            if attempt:
                time.sleep(params.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    self.endpoint, json=body, headers=self._headers(), timeout=params.timeout_ms / 1000
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                logger.warning("chat request failed (attempt %d): %s", attempt + 1, type(exc).__name__)
                continue
            if resp.status_code in _TRANSIENT_STATUS:
                last_exc = ClientUnavailable(f"HTTP {resp.status_code}")
                logger.warning("chat request got HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ClientUnavailable(f"endpoint rejected the request with HTTP {resp.status_code}")
            return ChatMessage("assistant", _extract_content(resp))
        raise ClientUnavailable(f"giving up after {params.max_retries + 1} attempts: {last_exc}")


def _extract_content(resp: requests.Response) -> str:
    try:
        payload = resp.json()
        content = payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed chat-completions response: {exc!r}") from None
    if not isinstance(content, str) or not content:
        raise ProtocolError("chat-completions response has empty content")
    return content
