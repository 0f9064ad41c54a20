"""AST node types for plan programs.

Nodes are frozen dataclasses. Source spans are excluded from equality so two
trees parsed from differently formatted text compare equal when their
structure matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0
    end_line: int = 0

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self.line}:{self.column}+{self.length}")
        if self.end_line < self.line:
            object.__setattr__(self, "end_line", self.line)


NO_SPAN = SourceSpan(1, 1, 0)


def _span() -> SourceSpan:
    return field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


# --- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: str | int | bool | None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ListLiteral:
    elements: tuple[Expr, ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class DictLiteral:
    entries: tuple[tuple[Expr, Expr], ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Name:
    id: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class FString:
    # Alternating literal text (str) and embedded expressions.
    parts: tuple[Union[str, Expr], ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Call:
    # Plain identifier ("retrieve") or an attribute path ("re.search").
    func: str
    args: tuple[Expr, ...] = ()
    kwargs: tuple[tuple[str, Expr], ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class MethodCall:
    receiver: Expr
    method: str
    args: tuple[Expr, ...] = ()
    kwargs: tuple[tuple[str, Expr], ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Index:
    receiver: Expr
    key: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class UnaryOp:
    op: str  # "not" or "-"
    operand: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ListComp:
    element: Expr
    targets: tuple[str, ...]
    iterable: Expr
    condition: Expr | None = None
    # True for the bare generator form used as a call argument: all(x for x in y).
    generator: bool = False
    span: SourceSpan = _span()


@dataclass(frozen=True)
class DictComp:
    key: Expr
    value: Expr
    targets: tuple[str, ...]
    iterable: Expr
    condition: Expr | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class IfExp:
    body: Expr
    test: Expr
    orelse: Expr
    span: SourceSpan = _span()


Expr = Union[
    Literal,
    ListLiteral,
    DictLiteral,
    Name,
    FString,
    Call,
    MethodCall,
    Index,
    BinOp,
    UnaryOp,
    ListComp,
    DictComp,
    IfExp,
]


# --- statements --------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    target: Name | Index
    value: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class For:
    targets: tuple[str, ...]
    iterable: Expr
    body: tuple[Stmt, ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class If:
    test: Expr
    body: tuple[Stmt, ...]
    elifs: tuple[tuple[Expr, tuple[Stmt, ...]], ...] = ()
    orelse: tuple[Stmt, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Return:
    value: Expr | None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Import:
    module: str
    span: SourceSpan = _span()


Stmt = Union[Assign, For, If, FunctionDef, Return, ExprStmt, Import]


@dataclass(frozen=True)
class PlanProgram:
    statements: tuple[Stmt, ...]
    source: str = field(default="", compare=False, repr=False)

    def statement_source(self, stmt: Stmt) -> str:
        """Source lines covered by *stmt* (header line only for blocks)."""
        lines = self.source.splitlines()
        span = stmt.span
        if isinstance(stmt, (For, If, FunctionDef)):
            end = span.line
        else:
            end = span.end_line
        return "\n".join(lines[span.line - 1 : end])
