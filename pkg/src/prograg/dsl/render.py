"""Render an AST back to plan source text.

The output is canonical rather than faithful: comments and layout are lost,
but re-parsing the rendered text yields a structurally equal tree.
"""

from __future__ import annotations

from .nodes import (
    Assign,
    BinOp,
    Call,
    DictComp,
    DictLiteral,
    Expr,
    ExprStmt,
    For,
    FString,
    FunctionDef,
    If,
    IfExp,
    Import,
    Index,
    ListComp,
    ListLiteral,
    Literal,
    MethodCall,
    Name,
    PlanProgram,
    Return,
    Stmt,
    UnaryOp,
)

INDENT = "    "

_PREC_IFEXP = 1
_PREC_POSTFIX = 9
_PREC_ATOM = 10
_BINARY_PREC = {
    "or": 2,
    "and": 3,
    "==": 5, "!=": 5, "<": 5, ">": 5, "<=": 5, ">=": 5, "in": 5, "not in": 5,
    "+": 6, "-": 6,
    "*": 7, "//": 7, "%": 7,
}
_UNARY_PREC = {"not": 4, "-": 8}


def precedence(expr: Expr) -> int:
    if isinstance(expr, IfExp):
        return _PREC_IFEXP
    if isinstance(expr, BinOp):
        return _BINARY_PREC[expr.op]
    if isinstance(expr, UnaryOp):
        return _UNARY_PREC[expr.op]
    if isinstance(expr, (Call, MethodCall, Index)):
        return _PREC_POSTFIX
    return _PREC_ATOM


def _wrap(expr: Expr, minimum: int) -> str:
    text = render_expr(expr)
    return f"({text})" if precedence(expr) < minimum else text


def _fstring_literal(text: str, quote: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == quote[0]:
            out.append("\\" + ch)
        elif ch == "{":
            out.append("{{")
        elif ch == "}":
            out.append("}}")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif not ch.isprintable():
            code = ord(ch)
            out.append(f"\\x{code:02x}" if code < 0x100 else f"\\u{code:04x}" if code < 0x10000 else f"\\U{code:08x}")
        else:
            out.append(ch)
    return "".join(out)


def _render_fstring(expr: FString) -> str:
    pieces = []
    for part in expr.parts:
        if isinstance(part, str):
            pieces.append(part)
        else:
            inner = render_expr(part)
            if inner.startswith("{"):
                inner = " " + inner
            if inner.endswith("}"):
                inner = inner + " "
            pieces.append(inner)
    embedded = "".join(p for p, part in zip(pieces, expr.parts) if not isinstance(part, str))
    # Embedded expressions may not contain the enclosing quote character.
    quote = next((q for q in ('"', "'") if q not in embedded), '"""' if '"""' not in embedded else "'''")
    body = []
    for piece, part in zip(pieces, expr.parts):
        if isinstance(part, str):
            body.append(_fstring_literal(part, quote))
        else:
            body.append("{" + piece + "}")
    return f"f{quote}{''.join(body)}{quote}"


def _args(args, kwargs) -> str:
    rendered = []
    for arg in args:
        if isinstance(arg, ListComp) and arg.generator:
            rendered.append(_comprehension_body(arg))
        else:
            rendered.append(render_expr(arg))
    rendered.extend(f"{name}={render_expr(value)}" for name, value in kwargs)
    return ", ".join(rendered)


def _targets(targets: tuple[str, ...]) -> str:
    return ", ".join(targets)


def _comprehension_body(expr: ListComp) -> str:
    text = f"{_wrap(expr.element, _PREC_IFEXP)} for {_targets(expr.targets)} in {_wrap(expr.iterable, 2)}"
    if expr.condition is not None:
        text += f" if {_wrap(expr.condition, 2)}"
    return text


def render_expr(expr: Expr) -> str:
    if isinstance(expr, Literal):
        return repr(expr.value)
    if isinstance(expr, Name):
        return expr.id
    if isinstance(expr, ListLiteral):
        return "[" + ", ".join(_wrap(e, _PREC_IFEXP) for e in expr.elements) + "]"
    if isinstance(expr, DictLiteral):
        return "{" + ", ".join(f"{_wrap(k, _PREC_IFEXP)}: {_wrap(v, _PREC_IFEXP)}" for k, v in expr.entries) + "}"
    if isinstance(expr, FString):
        return _render_fstring(expr)
    if isinstance(expr, Call):
        return f"{expr.func}({_args(expr.args, expr.kwargs)})"
    if isinstance(expr, MethodCall):
        receiver = _wrap(expr.receiver, _PREC_POSTFIX)
        # `0.lower()` would lex as a malformed float.
        if isinstance(expr.receiver, Literal) and type(expr.receiver.value) is int:
            receiver = f"({receiver})"
        return f"{receiver}.{expr.method}({_args(expr.args, expr.kwargs)})"
    if isinstance(expr, Index):
        return f"{_wrap(expr.receiver, _PREC_POSTFIX)}[{render_expr(expr.key)}]"
    if isinstance(expr, BinOp):
        prec = _BINARY_PREC[expr.op]
        # Comparisons are non-associative in the subset, so both sides bind tighter.
        left_min = prec + 1 if prec == 5 else prec
        return f"{_wrap(expr.left, left_min)} {expr.op} {_wrap(expr.right, prec + 1)}"
    if isinstance(expr, UnaryOp):
        if expr.op == "not":
            return f"not {_wrap(expr.operand, _UNARY_PREC['not'])}"
        return f"-{_wrap(expr.operand, _UNARY_PREC['-'])}"
    if isinstance(expr, ListComp):
        body = _comprehension_body(expr)
        return f"[{body}]"
    if isinstance(expr, DictComp):
        text = (
            f"{{{_wrap(expr.key, _PREC_IFEXP)}: {_wrap(expr.value, _PREC_IFEXP)}"
            f" for {_targets(expr.targets)} in {_wrap(expr.iterable, 2)}"
        )
        if expr.condition is not None:
            text += f" if {_wrap(expr.condition, 2)}"
        return text + "}"
    if isinstance(expr, IfExp):
        return f"{_wrap(expr.body, 2)} if {_wrap(expr.test, 2)} else {_wrap(expr.orelse, _PREC_IFEXP)}"
    raise TypeError(f"cannot render {type(expr).__name__}")


def _render_block(body: tuple[Stmt, ...], depth: int) -> list[str]:
    lines: list[str] = []
    for stmt in body:
        lines.extend(render_stmt(stmt, depth))
    return lines


def render_stmt(stmt: Stmt, depth: int = 0) -> list[str]:
    pad = INDENT * depth
    if isinstance(stmt, Assign):
        return [f"{pad}{render_expr(stmt.target)} = {render_expr(stmt.value)}"]
    if isinstance(stmt, ExprStmt):
        return [f"{pad}{render_expr(stmt.expr)}"]
    if isinstance(stmt, Import):
        return [f"{pad}import {stmt.module}"]
    if isinstance(stmt, Return):
        return [f"{pad}return" if stmt.value is None else f"{pad}return {render_expr(stmt.value)}"]
    if isinstance(stmt, For):
        return [f"{pad}for {_targets(stmt.targets)} in {render_expr(stmt.iterable)}:"] + _render_block(stmt.body, depth + 1)
    if isinstance(stmt, If):
        lines = [f"{pad}if {render_expr(stmt.test)}:"] + _render_block(stmt.body, depth + 1)
        for test, body in stmt.elifs:
            lines.append(f"{pad}elif {render_expr(test)}:")
            lines.extend(_render_block(body, depth + 1))
        if stmt.orelse:
            lines.append(f"{pad}else:")
            lines.extend(_render_block(stmt.orelse, depth + 1))
        return lines
    if isinstance(stmt, FunctionDef):
        return [f"{pad}def {stmt.name}({', '.join(stmt.params)}):"] + _render_block(stmt.body, depth + 1)
    raise TypeError(f"cannot render {type(stmt).__name__}")


def render_program(program: PlanProgram) -> str:
    return "\n".join(_render_block(program.statements, 0)) + ("\n" if program.statements else "")
