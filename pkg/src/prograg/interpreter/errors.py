from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..dsl.nodes import NO_SPAN, SourceSpan

SYNTAX_ERROR = "SyntaxError"
NAME_ERROR = "NameError"
TYPE_ERROR = "TypeError"
VALUE_ERROR = "ValueError"
INDEX_ERROR = "IndexError"
KEY_ERROR = "KeyError"
ZERO_DIVISION = "ZeroDivision"
UNSUPPORTED = "UnsupportedConstruct"
TOOL_FAILURE = "ToolFailure"
BUDGET_EXCEEDED = "BudgetExceeded"
TIMEOUT = "Timeout"

ERROR_KINDS = (
    SYNTAX_ERROR,
    NAME_ERROR,
    TYPE_ERROR,
    VALUE_ERROR,
    INDEX_ERROR,
    KEY_ERROR,
    ZERO_DIVISION,
    UNSUPPORTED,
    TOOL_FAILURE,
    BUDGET_EXCEEDED,
    TIMEOUT,
)

# Faults that a revised program cannot fix.
TERMINAL_KINDS = frozenset({TOOL_FAILURE})

# Display names used in traceback text, matching the reference interpreter.
_DISPLAY = {ZERO_DIVISION: "ZeroDivisionError"}


@dataclass(frozen=True)
class StructuredError:
    kind: str
    message: str
    span: SourceSpan = NO_SPAN
    traceback: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")

    @property
    def display_kind(self) -> str:
        return _DISPLAY.get(self.kind, self.kind)

    def render(self) -> str:
        """Text for the ``{error_msg}`` slot of the runtime-repair prompt."""
        return self.traceback or f"{self.display_kind}: {self.message}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "message": self.message,
            "line": self.span.line,
            "column": self.span.column,
            "traceback": self.render(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> StructuredError:
        return cls(
            data["kind"],
            data["message"],
            SourceSpan(int(data.get("line", 1)), int(data.get("column", 1))),
            data.get("traceback", ""),
        )


class PlanRuntimeError(Exception):
    """Raised inside the interpreter; converted to a StructuredError."""

    def __init__(self, kind: str, message: str, span: SourceSpan | None = None):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.span = span
        # Call-stack snapshot taken where the fault escaped a function frame.
        self.frames: list | None = None
        # Chat calls completed by a tool call that then failed.
        self.chat_calls = 0
