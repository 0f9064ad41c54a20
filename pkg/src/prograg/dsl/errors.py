from __future__ import annotations

import re
from dataclasses import dataclass

from .nodes import SourceSpan

_CONTROL = re.compile(r"[\x00-\x09\x0b-\x1f\x7f]")

MALFORMED = "malformed"
UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class SyntaxDiagnostic:
    message: str
    span: SourceSpan
    fragment: str = ""
    # "malformed" for text that is not valid in the grammar at all,
    # "unsupported" for well-formed Python outside the plan subset.
    kind: str = MALFORMED

    def __post_init__(self) -> None:
        message = _CONTROL.sub(" ", self.message).strip() or "invalid syntax"
        object.__setattr__(self, "message", message)
        object.__setattr__(self, "fragment", _CONTROL.sub(" ", self.fragment))

    @property
    def unsupported(self) -> bool:
        return self.kind == UNSUPPORTED

    def render(self) -> str:
        """Text used for the ``{error_detail}`` slot of the syntax-repair prompt."""
        label = "UnsupportedConstruct" if self.unsupported else "SyntaxError"
        out = f"{label}: {self.message} (line {self.span.line}, column {self.span.column})"
        if self.fragment:
            out += f"\n    {self.fragment}"
        return out


class PlanSyntaxError(Exception):
    """Raised by the lexer and parser; carries a :class:`SyntaxDiagnostic`."""

    def __init__(self, diagnostic: SyntaxDiagnostic):
        super().__init__(diagnostic.render())
        self.diagnostic = diagnostic


class LexError(PlanSyntaxError):
    pass
