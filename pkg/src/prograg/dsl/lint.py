"""Static advisories for parsed plans. Warnings never block execution."""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import (
    Assign,
    BinOp,
    Call,
    DictComp,
    Expr,
    ExprStmt,
    For,
    FString,
    FunctionDef,
    If,
    Import,
    Index,
    ListComp,
    Literal,
    Name,
    PlanProgram,
    Return,
    SourceSpan,
    Stmt,
)
from .parser import _children

FINAL_NAMES = ("final_answer", "final")


@dataclass(frozen=True)
class LintWarning:
    code: str
    message: str
    span: SourceSpan

    def render(self) -> str:
        return f"line {self.span.line}: [{self.code}] {self.message}"


def _names_in(expr: Expr, bound: frozenset[str] = frozenset()):
    """Yield free Name nodes, respecting comprehension scopes."""
    stack: list[tuple[object, frozenset[str]]] = [(expr, bound)]
    while stack:
        node, scope = stack.pop()
        if isinstance(node, Name):
            if node.id not in scope:
                yield node
            continue
        if isinstance(node, (ListComp, DictComp)):
            inner = scope | frozenset(node.targets)
            stack.append((node.iterable, scope))
            parts = [node.element] if isinstance(node, ListComp) else [node.key, node.value]
            if node.condition is not None:
                parts.append(node.condition)
            stack.extend((p, inner) for p in parts)
            continue
        stack.extend((child, scope) for child in _children(node))


def _calls_in(node: object):
    stack = [node]
    while stack:
        item = stack.pop()
        if isinstance(item, Call):
            yield item
        stack.extend(_children(item))


def _is_string_building(expr: Expr) -> bool:
    if isinstance(expr, FString):
        return True
    if isinstance(expr, BinOp) and expr.op == "+":
        return any(
            isinstance(side, (FString, Literal)) and not isinstance(getattr(side, "value", ""), int)
            or _is_string_building(side)
            for side in (expr.left, expr.right)
        )
    return False


class _Linter:
    def __init__(self, program: PlanProgram):
        self.program = program
        self.warnings: list[LintWarning] = []
        self.reported: set[str] = set()
        self.top_level: set[str] = set()
        for stmt in self._walk(program.statements):
            if isinstance(stmt, Assign) and isinstance(stmt.target, Name):
                self.top_level.add(stmt.target.id)
            elif isinstance(stmt, FunctionDef):
                self.top_level.add(stmt.name)
            elif isinstance(stmt, Import):
                self.top_level.add(stmt.module)
            elif isinstance(stmt, For):
                self.top_level.update(stmt.targets)

    @staticmethod
    def _walk(statements):
        stack = list(statements)
        while stack:
            stmt = stack.pop()
            yield stmt
            if isinstance(stmt, For):
                stack.extend(stmt.body)
            elif isinstance(stmt, If):
                stack.extend(stmt.body)
                for _, body in stmt.elifs:
                    stack.extend(body)
                stack.extend(stmt.orelse)

    def use(self, expr: Expr | None, assigned: set[str]) -> None:
        if expr is None:
            return
        for name in _names_in(expr):
            if name.id not in assigned and name.id not in self.reported:
                self.reported.add(name.id)
                self.warnings.append(
                    LintWarning("use-before-assign", f"'{name.id}' is used before it is assigned", name.span)
                )

    def block(self, body: tuple[Stmt, ...], assigned: set[str]) -> None:
        for stmt in body:
            self.statement(stmt, assigned)

    def statement(self, stmt: Stmt, assigned: set[str]) -> None:
        if isinstance(stmt, Assign):
            self.use(stmt.value, assigned)
            if isinstance(stmt.target, Index):
                self.use(stmt.target, assigned)
            else:
                assigned.add(stmt.target.id)
        elif isinstance(stmt, ExprStmt):
            self.use(stmt.expr, assigned)
        elif isinstance(stmt, Return):
            self.use(stmt.value, assigned)
        elif isinstance(stmt, Import):
            assigned.add(stmt.module)
        elif isinstance(stmt, For):
            self.use(stmt.iterable, assigned)
            assigned.update(stmt.targets)
            self.block(stmt.body, assigned)
        elif isinstance(stmt, If):
            self.use(stmt.test, assigned)
            self.block(stmt.body, assigned)
            for test, body in stmt.elifs:
                self.use(test, assigned)
                self.block(body, assigned)
            self.block(stmt.orelse, assigned)
        elif isinstance(stmt, FunctionDef):
            # Function bodies run later, so any top-level binding is visible.
            local = set(self.top_level) | set(stmt.params)
            self.block(stmt.body, local)

    def run(self, expected_hops: int | None) -> list[LintWarning]:
        statements = self.program.statements
        self.block(statements, set())

        finals = [
            s for s in self._walk(statements)
            if isinstance(s, Assign) and isinstance(s.target, Name) and s.target.id in FINAL_NAMES
        ]
        end = statements[-1].span if statements else SourceSpan(1, 1, 0)
        if not finals:
            self.warnings.append(
                LintWarning("missing-final", "program never assigns final_answer (or final)", end)
            )
        for stmt in finals:
            if _is_string_building(stmt.value):
                self.warnings.append(
                    LintWarning(
                        "final-not-answer",
                        "the final value must come from an answer() call, not an f-string or string concatenation",
                        stmt.span,
                    )
                )

        retrieves = sum(1 for s in statements for c in _calls_in(s) if c.func == "retrieve")
        if any(isinstance(s, For) and any(c.func == "retrieve" for c in _calls_in(s)) for s in self._walk(statements)):
            retrieves = max(retrieves, 2)  # a loop body may run many times
        if retrieves == 0:
            self.warnings.append(LintWarning("no-retrieve", "program never calls retrieve()", end))
        elif retrieves == 1 and expected_hops is not None and expected_hops > 1:
            self.warnings.append(
                LintWarning(
                    "single-retrieve",
                    f"only one retrieve() call for a question with {expected_hops} sub-queries",
                    end,
                )
            )
        self.warnings.sort(key=lambda w: (w.span.line, w.span.column))
        return self.warnings


def lint_program(program: PlanProgram, expected_hops: int | None = None) -> list[LintWarning]:
    """Return advisory warnings.

    ``expected_hops`` is the number of sub-queries the question was split
    into; when it exceeds one, a plan with a single retrieve() is flagged.
    """
    return _Linter(program).run(expected_hops)
