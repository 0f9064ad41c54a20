"""Scripted chat client for hermetic tests.

A script is JSON lines of ``{"fingerprint": ..., "response": ...}``.
Entries sharing a fingerprint form a queue consumed in file order; the last
entry of a queue is sticky, so a repeated identical request keeps getting
the same reply. A fingerprint may contain ``*`` wildcards. Exact entries
are consulted before patterns.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import ToolFailure
from .client import ChatMessage, GenerationParams, PromptTag, check_messages


class ReplayMiss(ToolFailure):
    def __init__(self, fingerprint: str):
        super().__init__(f"no replay entry matches fingerprint {fingerprint!r}")
        self.fingerprint = fingerprint


class ReplayScriptError(ValueError):
    pass


def _pattern(fingerprint: str) -> re.Pattern[str]:
    return re.compile(".*".join(re.escape(part) for part in fingerprint.split("*")), re.DOTALL)


@dataclass(frozen=True)
class ReplayEntry:
    fingerprint: str
    response: str


@dataclass
class ReplayCall:
    fingerprint: str
    messages: tuple[ChatMessage, ...]
    response: str


def read_script(path: str | Path) -> list[ReplayEntry]:
    entries = []
    with open(path, encoding="utf-8") as handle:
        for number, raw in enumerate(handle, 1):
            if not raw.strip():
                continue
            try:
                data = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ReplayScriptError(f"{path}: line {number}: invalid JSON ({exc.msg})") from None
            if (
                not isinstance(data, dict)
                or not isinstance(data.get("fingerprint"), str)
                or not isinstance(data.get("response"), str)
            ):
                raise ReplayScriptError(f"{path}: line {number}: expected string fields 'fingerprint' and 'response'")
            entries.append(ReplayEntry(data["fingerprint"], data["response"]))
    return entries


class ReplayChatClient:
    """Deterministic stand-in for a chat endpoint. Never touches the network."""

    def __init__(self, entries: Iterable[ReplayEntry]):
        self.entries = list(entries)
        self._queues: dict[str, list[str]] = {}
        for entry in self.entries:
            self._queues.setdefault(entry.fingerprint, []).append(entry.response)
        self._patterns = [(fp, _pattern(fp)) for fp in self._queues if "*" in fp]
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls: list[ReplayCall] = []

    @classmethod
    def from_file(cls, *paths: str | Path) -> ReplayChatClient:
        entries: list[ReplayEntry] = []
        for path in paths:
            entries.extend(read_script(path))
        return cls(entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> ReplayChatClient:
        return cls(ReplayEntry(fp, response) for fp, response in pairs)

    def fork(self) -> ReplayChatClient:
        """A client over the same script with fresh cursors and call log."""
        return ReplayChatClient(self.entries)

    def resolve(self, fingerprint: str) -> str | None:
        if fingerprint in self._queues:
            return fingerprint
        for source, pattern in self._patterns:
            if pattern.fullmatch(fingerprint):
                return source
        return None

    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams, tag: PromptTag | None = None) -> str:
        check_messages(messages)
        fingerprint = tag.fingerprint if tag is not None else "untagged:" + messages[-1].content[:64]
        key = self.resolve(fingerprint)
        if key is None:
            raise ReplayMiss(fingerprint)
        with self._lock:
            queue = self._queues[key]
            cursor = self._cursor.get(key, 0)
            response = queue[min(cursor, len(queue) - 1)]
            self._cursor[key] = cursor + 1
            self.calls.append(ReplayCall(fingerprint, tuple(messages), response))
        return response
