"""Exceptions shared across layers."""

from __future__ import annotations


class ToolFailure(Exception):
    """A backend (retriever, chat endpoint, replay script) failed.

    ``chat_calls`` counts model calls that completed before the fault, so
    call accounting stays exact on failure paths.
    """

    def __init__(self, message: str = "", chat_calls: int = 0):
        super().__init__(message)
        self.chat_calls = chat_calls


class PreconditionError(ValueError):
    """An operation was called with arguments outside its contract."""
