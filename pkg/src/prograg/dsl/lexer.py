"""Tokenizer for plan programs.

Produces a flat token list in which indentation has already been resolved
into ``indent``/``dedent`` tokens and logical lines are separated by
``newline`` tokens. No ``newline`` is emitted after the final logical line.
"""

from __future__ import annotations

import ast
import keyword
import re
import warnings
from dataclasses import dataclass
from typing import Any

from .errors import LexError, SyntaxDiagnostic
from .nodes import SourceSpan

MAX_TOKENS = 100_000

IDENTIFIER = "identifier"
KEYWORD = "keyword"
INTEGER = "integer"
FLOAT = "float"
STRING = "string"
FSTRING = "fstring"
BYTES = "bytes"
OP = "op"
NEWLINE = "newline"
INDENT = "indent"
DEDENT = "dedent"

_PUNCT = {
    "=": "assign",
    "(": "lparen",
    ")": "rparen",
    "[": "lbracket",
    "]": "rbracket",
    "{": "lbrace",
    "}": "rbrace",
    ",": "comma",
    ":": "colon",
    ".": "dot",
}

# Longest first so that "//" wins over "/" and so on.
_OPERATORS = sorted(
    [
        "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=",
        "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "<<",
        ">>", "+", "-", "*", "/", "%", "<", ">", ";", "@", "|", "&", "^", "~",
        *_PUNCT,
    ],
    key=len,
    reverse=True,
)

_FENCE_TAG = re.compile(r"[A-Za-z0-9_+#.-]*")
_STRING_PREFIXES = {"r", "u", "f", "b", "rb", "br", "fr", "rf"}
_OPENERS = {"(": ")", "[": "]", "{": "}"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    offset: int
    value: Any = None

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.column, len(self.text.split("\n", 1)[0]))


@dataclass(frozen=True)
class FStringBody:
    """Raw contents of an f-string token, positioned for sub-parsing."""

    body: str
    raw: bool
    quote: str
    line: int
    column: int


def strip_code_fences(source: str) -> str:
    """Remove a Markdown code-fence wrapper and its language tag.

    Everything before the first fence is dropped, and the content runs until
    the next fence (or the end of the text). The result never contains a
    fence, which makes the operation idempotent.
    """
    text = source.replace("\r\n", "\n").replace("\r", "\n")
    start = text.find("```")
    if start >= 0:
        rest = text[start + 3 :]
        line_end = rest.find("\n")
        if line_end >= 0 and _FENCE_TAG.fullmatch(rest[:line_end].strip()):
            rest = rest[line_end + 1 :]
        end = rest.find("```")
        text = rest if end < 0 else rest[:end]
    return text.strip("\n").rstrip()


def _fail(message: str, line: int, column: int, fragment: str = "", length: int = 1) -> LexError:
    return LexError(SyntaxDiagnostic(message, SourceSpan(line, column, length), fragment))


class _Lexer:
    def __init__(self, source: str, line: int = 1, column: int = 1, fragment_mode: bool = False):
        self.src = source
        self.pos = 0
        self.line = line
        self.col = column
        self.fragment_mode = fragment_mode
        self.tokens: list[Token] = []
        self.indents = [0]
        self.brackets: list[Token] = []
        self.lines = source.split("\n")

    # -- helpers ---------------------------------------------------------------

    def line_text(self, line: int) -> str:
        idx = line - 1
        return self.lines[idx] if 0 <= idx < len(self.lines) else ""

    def error(self, message: str, line: int | None = None, column: int | None = None, length: int = 1) -> LexError:
        line = self.line if line is None else line
        column = self.col if column is None else column
        text = self.line_text(line) if not self.fragment_mode else self.src
        length = max(0, min(length, len(text) - column + 1))
        return _fail(message, line, column, text.strip(), length)

    def advance(self, count: int = 1) -> None:
        for _ in range(count):
            if self.src[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def emit(self, kind: str, text: str, line: int, column: int, offset: int, value: Any = None) -> None:
        if len(self.tokens) >= MAX_TOKENS:
            raise self.error(f"program exceeds {MAX_TOKENS} tokens", line, column)
        self.tokens.append(Token(kind, text, line, column, offset, value))

    # -- main loop -------------------------------------------------------------

    def run(self) -> list[Token]:
        at_line_start = not self.fragment_mode
        n = len(self.src)
        while self.pos < n:
            if at_line_start and not self.brackets:
                at_line_start = self.indentation()
                if at_line_start:
                    continue
            ch = self.src[self.pos]
            if ch == "\n":
                if not self.brackets and not self.fragment_mode:
                    if self.tokens and self.tokens[-1].kind not in (NEWLINE, INDENT, DEDENT):
                        self.emit(NEWLINE, "\n", self.line, self.col, self.pos)
                    at_line_start = True
                self.advance()
            elif ch in " \t\f":
                self.advance()
            elif ch == "#":
                while self.pos < n and self.src[self.pos] != "\n":
                    self.advance()
            elif ch == "\\":
                if self.pos + 1 < n and self.src[self.pos + 1] == "\n":
                    self.advance(2)
                else:
                    raise self.error("unexpected character after line continuation character")
            elif ch in "'\"":
                self.string("")
            elif ch.isdigit():
                self.number()
            elif ch.isascii() and (ch.isalpha() or ch == "_"):
                self.name()
            elif ch == "." and self.pos + 1 < n and self.src[self.pos + 1].isdigit():
                self.number()
            else:
                self.operator()
        if self.brackets:
            opener = self.brackets[-1]
            raise self.error(f"'{opener.text}' was never closed", opener.line, opener.column)
        while len(self.indents) > 1:
            self.indents.pop()
            self.emit(DEDENT, "", self.line, self.col, self.pos)
        return self.tokens

    def indentation(self) -> bool:
        """Measure leading whitespace; return True when the line was skipped."""
        start_line = self.line
        width = 0
        n = len(self.src)
        while self.pos < n and self.src[self.pos] in " \t\f":
            if self.src[self.pos] == "\t":
                raise self.error("tab character in indentation (use spaces)", start_line, self.col)
            width += 1
            self.advance()
        if self.pos >= n or self.src[self.pos] in "\n#":
            while self.pos < n and self.src[self.pos] != "\n":
                self.advance()
            if self.pos < n:
                self.advance()
            return True
        if self.src[self.pos] == "\\" and self.pos + 1 < n and self.src[self.pos + 1] == "\n":
            return False
        if width > self.indents[-1]:
            self.indents.append(width)
            self.emit(INDENT, " " * width, self.line, 1, self.pos - width)
        elif width < self.indents[-1]:
            while width < self.indents[-1]:
                self.indents.pop()
                self.emit(DEDENT, "", self.line, self.col, self.pos)
            if width != self.indents[-1]:
                raise self.error("unindent does not match any outer indentation level", self.line, 1, width)
        return False

    def name(self) -> None:
        start, line, col = self.pos, self.line, self.col
        n = len(self.src)
        while self.pos < n and self.src[self.pos].isascii() and (self.src[self.pos].isalnum() or self.src[self.pos] == "_"):
            self.advance()
        text = self.src[start : self.pos]
        if self.pos < n and self.src[self.pos] in "'\"" and text.lower() in _STRING_PREFIXES:
            self.pos, self.line, self.col = start, line, col
            self.string(text)
            return
        if self.pos < n and not self.src[self.pos].isascii() and self.src[self.pos].isalnum():
            raise self.error("invalid character in identifier (names use only ASCII letters, digits and underscores)")
        kind = KEYWORD if keyword.iskeyword(text) else IDENTIFIER
        self.emit(kind, text, line, col, start)

    def number(self) -> None:
        start, line, col = self.pos, self.line, self.col
        n = len(self.src)
        is_float = False
        while self.pos < n and (self.src[self.pos].isalnum() or self.src[self.pos] in "_."):
            ch = self.src[self.pos]
            if ch == ".":
                is_float = True
            elif ch in "eE" and not self.src[start : self.pos].lower().startswith("0x"):
                is_float = True
                if self.pos + 1 < n and self.src[self.pos + 1] in "+-":
                    self.advance()
            self.advance()
        text = self.src[start : self.pos]
        try:
            # Text like "1abc" makes the compiler warn before it fails.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", (SyntaxWarning, DeprecationWarning))
                value = ast.literal_eval(text)
        except (SyntaxError, ValueError):
            raise self.error(f"invalid number literal {text!r}", line, col, len(text)) from None
        if isinstance(value, bool) or not isinstance(value, (int, float, complex)):
            raise self.error(f"invalid number literal {text!r}", line, col, len(text))
        kind = INTEGER if isinstance(value, int) and not is_float else FLOAT
        self.emit(kind, text, line, col, start, value)

    def string(self, prefix: str) -> None:
        start, line, col = self.pos, self.line, self.col
        self.advance(len(prefix))
        quote_char = self.src[self.pos]
        triple = self.src.startswith(quote_char * 3, self.pos)
        quote = quote_char * (3 if triple else 1)
        self.advance(len(quote))
        body_start, body_line, body_col = self.pos, self.line, self.col
        n = len(self.src)
        while True:
            if self.pos >= n:
                raise self.error("unterminated string literal", line, col)
            ch = self.src[self.pos]
            if ch == "\\":
                if self.pos + 1 >= n:
                    raise self.error("unterminated string literal", line, col)
                self.advance(2)
                continue
            if ch == "\n" and not triple:
                raise self.error("unterminated string literal", line, col)
            if self.src.startswith(quote, self.pos):
                break
            self.advance()
        body = self.src[body_start : self.pos]
        self.advance(len(quote))
        text = self.src[start : self.pos]
        lowered = prefix.lower()
        if "f" in lowered:
            value = FStringBody(body, "r" in lowered, quote, body_line, body_col)
            self.emit(FSTRING, text, line, col, start, value)
            return
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                value = ast.literal_eval(text)
        except (SyntaxError, ValueError) as exc:
            raise self.error(f"invalid string literal: {exc}", line, col, len(text)) from None
        self.emit(BYTES if isinstance(value, bytes) else STRING, text, line, col, start, value)

    def operator(self) -> None:
        line, col, start = self.line, self.col, self.pos
        for op in _OPERATORS:
            if self.src.startswith(op, self.pos):
                break
        else:
            ch = self.src[self.pos]
            if ch == "`":
                raise self.error("backticks are not valid Python; use quotes for strings")
            raise self.error(f"invalid character {ch!r} (U+{ord(ch):04X})")
        self.advance(len(op))
        if op in _OPENERS:
            tok = Token(_PUNCT[op], op, line, col, start)
            self.brackets.append(tok)
        elif op in ")]}":
            if not self.brackets:
                raise self.error(f"unmatched '{op}'", line, col)
            opener = self.brackets.pop()
            if _OPENERS[opener.text] != op:
                raise self.error(
                    f"closing parenthesis '{op}' does not match opening parenthesis '{opener.text}'"
                    f" on line {opener.line}",
                    line,
                    col,
                )
        self.emit(_PUNCT.get(op, OP), op, line, col, start)


def tokenize(source: str) -> list[Token]:
    """Tokenize plan source text, stripping any code-fence wrapper first."""
    return _Lexer(strip_code_fences(source)).run()


def tokenize_fragment(text: str, line: int, column: int) -> list[Token]:
    """Tokenize an embedded f-string expression positioned at (line, column)."""
    return _Lexer(text, line, column, fragment_mode=True).run()
