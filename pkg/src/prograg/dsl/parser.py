"""Recursive-descent parser for the plan subset of Python.

``parse_program`` either returns a :class:`PlanProgram` or raises
:class:`PlanSyntaxError`; it never raises anything else. Constructs that are
valid Python but outside the subset produce a diagnostic of kind
``unsupported`` so the planner can be steered back into the subset.
"""

from __future__ import annotations

import ast
import builtins
import warnings
from dataclasses import fields, is_dataclass

from . import lexer as lx
from .errors import MALFORMED, UNSUPPORTED, PlanSyntaxError, SyntaxDiagnostic
from .lexer import FStringBody, Token, strip_code_fences, tokenize_fragment
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
    SourceSpan,
    Stmt,
    UnaryOp,
)

TOOLS = frozenset({"retrieve", "answer"})
BUILTINS = frozenset({"int", "str", "len", "all", "any", "range"})
METHODS = frozenset(
    {"split", "strip", "lower", "upper", "join", "values", "keys", "items", "append", "get", "group"}
)
MODULE_FUNCTIONS = frozenset({"re.search"})

MAX_NESTING = 40
MAX_TREE_DEPTH = 120

_COMPARE = {"==", "!=", "<", ">", "<=", ">="}
_UNSUPPORTED_STATEMENTS = {
    "while": "while loops",
    "class": "class definitions",
    "try": "try/except blocks",
    "with": "with blocks",
    "lambda": "lambda expressions",
    "del": "del statements",
    "global": "global declarations",
    "nonlocal": "nonlocal declarations",
    "assert": "assert statements",
    "raise": "raise statements",
    "async": "async code",
    "await": "await expressions",
    "yield": "yield expressions",
    "pass": "pass statements",
    "break": "break statements",
    "continue": "continue statements",
    "from": "from-imports",
}
_PYTHON_BUILTINS = frozenset(name for name in dir(builtins) if not name.startswith("_"))


class _Parser:
    def __init__(self, tokens: list[Token], source: str):
        self.tokens = tokens
        self.pos = 0
        self.lines = source.split("\n")
        self.nesting = 0
        self.in_function = False
        self.prev: Token | None = None

    # -- token helpers ----------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token | None:
        idx = self.pos + ahead
        return self.tokens[idx] if idx < len(self.tokens) else None

    def at(self, kind: str, text: str | None = None, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok is not None and tok.kind == kind and (text is None or tok.text == text)

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == lx.KEYWORD and tok.text in words

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self.fail("unexpected end of input")
        self.pos += 1
        self.prev = tok
        return tok

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if not self.at(kind, text):
            raise self.fail(f"expected {what or repr(text or kind)}")
        return self.next()

    def fail(self, message: str, tok: Token | None = None, kind: str = MALFORMED) -> PlanSyntaxError:
        tok = tok or self.peek()
        if tok is None:
            # End of input: point just past the last token.
            last = self.tokens[-1] if self.tokens else None
            if last is None:
                line, column, length = 1, 1, 0
            else:
                line = last.line + last.text.count("\n")
                tail = last.text.rsplit("\n", 1)[-1]
                column = (last.column if "\n" not in last.text else 1) + len(tail)
                column = max(1, min(column, len(self._line(line)) + 1))
                length = 0
            if message == "unexpected end of input" or message.startswith("expected"):
                message = f"{message} (unexpected end of input)" if message != "unexpected end of input" else message
        else:
            line, column = tok.line, tok.column
            length = min(len(tok.text.split("\n", 1)[0]), max(0, len(self._line(line)) - column + 1))
            if tok.kind in (lx.NEWLINE, lx.DEDENT):
                length = 0
            if message.startswith("expected"):
                shown = {"newline": "end of line", "dedent": "end of block", "indent": "indent"}.get(tok.kind, repr(tok.text))
                message = f"{message}, found {shown}"
        span = SourceSpan(line, column, length)
        return PlanSyntaxError(SyntaxDiagnostic(message, span, self._line(line).strip(), kind))

    def unsupported(self, what: str, tok: Token | None = None) -> PlanSyntaxError:
        return self.fail(f"unsupported construct: {what}", tok, UNSUPPORTED)

    def _line(self, line: int) -> str:
        return self.lines[line - 1] if 0 < line <= len(self.lines) else ""

    def span_from(self, start: Token) -> SourceSpan:
        end = self.prev or start
        end_line = end.line + end.text.count("\n")
        if end_line == start.line:
            length = end.column + len(end.text) - start.column
        else:
            length = len(self._line(start.line)) - start.column + 1
        return SourceSpan(start.line, start.column, max(0, length), end_line)

    def enter(self) -> None:
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise self.fail("program is too deeply nested")

    def leave(self) -> None:
        self.nesting -= 1

    # -- statements ---------------------------------------------------------

    def program(self) -> list[Stmt]:
        statements: list[Stmt] = []
        while self.peek() is not None:
            if self.at(lx.NEWLINE):
                self.next()
                continue
            if self.at(lx.INDENT):
                raise self.fail("unexpected indent")
            if self.at(lx.DEDENT):
                self.next()
                continue
            statements.append(self.statement())
        return statements

    def statement(self) -> Stmt:
        tok = self.peek()
        assert tok is not None
        if tok.kind == lx.KEYWORD:
            word = tok.text
            if word == "for":
                return self.for_statement()
            if word == "if":
                return self.if_statement()
            if word == "def":
                return self.def_statement()
            if word == "import":
                return self.import_statement()
            if word == "return":
                return self.return_statement()
            if word in _UNSUPPORTED_STATEMENTS:
                raise self.unsupported(_UNSUPPORTED_STATEMENTS[word])
            if word not in ("not", "True", "False", "None"):
                raise self.fail("invalid syntax")
        return self.simple_statement()

    def end_simple(self) -> None:
        if self.at(lx.NEWLINE):
            self.next()
            return
        if self.peek() is None or self.at(lx.DEDENT):
            return
        if self.at(lx.OP, ";"):
            raise self.unsupported("semicolon-separated statements")
        raise self.fail("invalid syntax")

    def simple_statement(self) -> Stmt:
        start = self.peek()
        assert start is not None
        expr = self.expression()
        if self.at("assign"):
            if not isinstance(expr, (Name, Index)):
                raise self.fail(f"cannot assign to {_describe(expr)}", start)
            self.next()
            value = self.expression()
            if self.at("assign"):
                raise self.unsupported("chained assignments")
            if self.at("comma"):
                raise self.unsupported("tuples")
            stmt: Stmt = Assign(expr, value, span=self.span_from(start))
        else:
            tok = self.peek()
            if tok is not None and tok.kind == lx.OP and tok.text.endswith("=") and tok.text not in _COMPARE:
                raise self.unsupported("augmented assignments")
            if self.at("colon"):
                raise self.unsupported("annotated assignments")
            if self.at("comma"):
                raise self.unsupported("tuple unpacking and tuple expressions")
            stmt = ExprStmt(expr, span=self.span_from(start))
        self.end_simple()
        return stmt

    def block(self) -> tuple[Stmt, ...]:
        self.expect("colon", ":", "':'")
        self.enter()
        try:
            if not self.at(lx.NEWLINE):
                # Single simple statement on the header line.
                if self.at_keyword("for", "if", "def"):
                    raise self.fail("invalid syntax")
                return (self.statement(),)
            self.next()
            if not self.at(lx.INDENT):
                raise self.fail("expected an indented block")
            self.next()
            body: list[Stmt] = []
            while not self.at(lx.DEDENT) and self.peek() is not None:
                if self.at(lx.NEWLINE):
                    self.next()
                    continue
                if self.at(lx.INDENT):
                    raise self.fail("unexpected indent")
                body.append(self.statement())
            if self.at(lx.DEDENT):
                self.next()
            return tuple(body)
        finally:
            self.leave()

    def targets(self) -> tuple[str, ...]:
        paren = self.at("lparen")
        if paren:
            self.next()
        names = [self.expect(lx.IDENTIFIER, what="a loop variable name").text]
        while self.at("comma"):
            self.next()
            if not self.at(lx.IDENTIFIER):
                break
            names.append(self.next().text)
        if paren:
            self.expect("rparen", ")", "')'")
        return tuple(names)

    def for_statement(self) -> Stmt:
        start = self.next()
        targets = self.targets()
        if not self.at_keyword("in"):
            raise self.fail("expected 'in'")
        self.next()
        iterable = self.expression()
        header = self.span_from(start)
        body = self.block()
        if self.at_keyword("else"):
            raise self.unsupported("for-else clauses")
        return For(targets, iterable, body, span=header)

    def if_statement(self) -> Stmt:
        start = self.next()
        test = self.expression()
        header = self.span_from(start)
        body = self.block()
        elifs = []
        orelse: tuple[Stmt, ...] = ()
        while self.at_keyword("elif"):
            self.next()
            cond = self.expression()
            elifs.append((cond, self.block()))
        if self.at_keyword("else"):
            self.next()
            orelse = self.block()
        return If(test, body, tuple(elifs), orelse, span=header)

    def def_statement(self) -> Stmt:
        start = self.next()
        if self.in_function:
            raise self.unsupported("nested function definitions", start)
        name = self.expect(lx.IDENTIFIER, what="a function name").text
        self.expect("lparen", "(", "'('")
        params: list[str] = []
        while not self.at("rparen"):
            tok = self.peek()
            if tok is not None and tok.kind == lx.OP and tok.text in ("*", "**"):
                raise self.unsupported("variadic parameters")
            params.append(self.expect(lx.IDENTIFIER, what="a parameter name").text)
            if self.at("assign"):
                raise self.unsupported("default parameter values")
            if self.at("colon"):
                raise self.unsupported("parameter annotations")
            if not self.at("comma"):
                break
            self.next()
        self.expect("rparen", ")", "')'")
        if self.at(lx.OP, "->"):
            raise self.unsupported("return annotations")
        if len(set(params)) != len(params):
            raise self.fail(f"duplicate argument in function definition '{name}'", start)
        header = self.span_from(start)
        self.in_function = True
        try:
            body = self.block()
        finally:
            self.in_function = False
        return FunctionDef(name, tuple(params), body, span=header)

    def return_statement(self) -> Stmt:
        start = self.next()
        if not self.in_function:
            raise self.fail("'return' outside function", start)
        value = None
        if not (self.at(lx.NEWLINE) or self.at(lx.DEDENT) or self.peek() is None):
            value = self.expression()
        stmt = Return(value, span=self.span_from(start))
        self.end_simple()
        return stmt

    def import_statement(self) -> Stmt:
        start = self.next()
        module = self.expect(lx.IDENTIFIER, what="a module name").text
        while self.at("dot"):
            self.next()
            module += "." + self.expect(lx.IDENTIFIER, what="a module name").text
        if self.at_keyword("as"):
            raise self.unsupported("import aliases")
        if self.at("comma"):
            raise self.unsupported("multiple imports on one line")
        if module != "re":
            raise self.fail(f"unsupported construct: import of module '{module}' (only 're' is available)", start, UNSUPPORTED)
        stmt = Import(module, span=self.span_from(start))
        self.end_simple()
        return stmt

    # -- expressions --------------------------------------------------------

    def expression(self) -> Expr:
        self.enter()
        try:
            start = self.peek()
            if self.at_keyword("lambda"):
                raise self.unsupported("lambda expressions")
            if self.at_keyword("yield", "await"):
                raise self.unsupported(_UNSUPPORTED_STATEMENTS[self.peek().text])
            body = self.or_expr()
            if self.at_keyword("if"):
                self.next()
                test = self.or_expr()
                if not self.at_keyword("else"):
                    raise self.fail("expected 'else' after 'if' expression")
                self.next()
                orelse = self.expression()
                return IfExp(body, test, orelse, span=self.span_from(start))
            if self.at(lx.OP, ":="):
                raise self.unsupported("assignment expressions")
            return body
        finally:
            self.leave()

    def or_expr(self) -> Expr:
        start = self.peek()
        left = self.and_expr()
        while self.at_keyword("or"):
            self.next()
            left = BinOp("or", left, self.and_expr(), span=self.span_from(start))
        return left

    def and_expr(self) -> Expr:
        start = self.peek()
        left = self.not_expr()
        while self.at_keyword("and"):
            self.next()
            left = BinOp("and", left, self.not_expr(), span=self.span_from(start))
        return left

    def not_expr(self) -> Expr:
        if self.at_keyword("not"):
            start = self.next()
            self.enter()
            try:
                operand = self.not_expr()
            finally:
                self.leave()
            return UnaryOp("not", operand, span=self.span_from(start))
        return self.comparison()

    def compare_op(self) -> str | None:
        tok = self.peek()
        if tok is None:
            return None
        if tok.kind == lx.OP and tok.text in _COMPARE:
            return tok.text
        if tok.kind == lx.KEYWORD:
            if tok.text == "in":
                return "in"
            if tok.text == "not" and self.at(lx.KEYWORD, "in", 1):
                return "not in"
            if tok.text == "is":
                return "is"
        return None

    def comparison(self) -> Expr:
        start = self.peek()
        left = self.arith()
        op = self.compare_op()
        if op is None:
            return left
        if op == "is":
            raise self.unsupported("identity comparisons ('is')")
        self.next()
        if op == "not in":
            self.next()
        right = self.arith()
        if self.compare_op() is not None:
            raise self.unsupported("chained comparisons")
        return BinOp(op, left, right, span=self.span_from(start))

    def arith(self) -> Expr:
        start = self.peek()
        left = self.term()
        while self.at(lx.OP, "+") or self.at(lx.OP, "-"):
            op = self.next().text
            left = BinOp(op, left, self.term(), span=self.span_from(start))
        return left

    def term(self) -> Expr:
        start = self.peek()
        left = self.factor()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != lx.OP or tok.text not in ("*", "//", "%", "/", "@"):
                return left
            if tok.text == "/":
                raise self.unsupported("true division ('/')")
            if tok.text == "@":
                raise self.unsupported("matrix multiplication ('@')")
            self.next()
            left = BinOp(tok.text, left, self.factor(), span=self.span_from(start))

    def factor(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == lx.OP and tok.text in ("-", "+", "~"):
            if tok.text != "-":
                raise self.unsupported(f"unary '{tok.text}' operators")
            self.next()
            self.enter()
            try:
                operand = self.factor()
            finally:
                self.leave()
            return UnaryOp("-", operand, span=self.span_from(tok))
        expr = self.postfix()
        if self.at(lx.OP, "**"):
            raise self.unsupported("power operators ('**')")
        return expr

    def postfix(self) -> Expr:
        start = self.peek()
        expr = self.atom()
        while True:
            if self.at("lparen"):
                if not isinstance(expr, Name):
                    raise self.unsupported("calls of computed expressions")
                args, kwargs = self.call_args()
                expr = Call(expr.id, args, kwargs, span=self.span_from(start))
            elif self.at("dot"):
                self.next()
                attr = self.expect(lx.IDENTIFIER, what="an attribute name")
                if not self.at("lparen"):
                    raise self.unsupported("attribute access other than method calls", attr)
                if isinstance(expr, Name) and expr.id == "re":
                    path = f"re.{attr.text}"
                    if path not in MODULE_FUNCTIONS:
                        raise self.fail(f"unsupported construct: '{path}'", attr, UNSUPPORTED)
                    args, kwargs = self.call_args()
                    expr = Call(path, args, kwargs, span=self.span_from(start))
                else:
                    if attr.text not in METHODS:
                        raise self.fail(f"unsupported construct: method '.{attr.text}()'", attr, UNSUPPORTED)
                    args, kwargs = self.call_args()
                    expr = MethodCall(expr, attr.text, args, kwargs, span=self.span_from(start))
            elif self.at("lbracket"):
                self.next()
                if self.at("colon"):
                    raise self.unsupported("slices")
                key = self.expression()
                if self.at("colon"):
                    raise self.unsupported("slices")
                if self.at("comma"):
                    raise self.unsupported("tuple subscripts")
                self.expect("rbracket", "]", "']'")
                expr = Index(expr, key, span=self.span_from(start))
            else:
                return expr

    def call_args(self) -> tuple[tuple[Expr, ...], tuple[tuple[str, Expr], ...]]:
        self.expect("lparen", "(", "'('")
        args: list[Expr] = []
        kwargs: list[tuple[str, Expr]] = []
        while not self.at("rparen"):
            tok = self.peek()
            if tok is None:
                raise self.fail("unexpected end of input")
            if tok.kind == lx.OP and tok.text in ("*", "**"):
                raise self.unsupported("starred arguments")
            if tok.kind == lx.IDENTIFIER and self.at("assign", ahead=1):
                name = self.next().text
                self.next()
                if name in (k for k, _ in kwargs):
                    raise self.fail(f"keyword argument repeated: {name}", tok)
                kwargs.append((name, self.expression()))
            else:
                if kwargs:
                    raise self.fail("positional argument follows keyword argument")
                start = self.peek()
                value = self.expression()
                if self.at_keyword("for"):
                    value = self.comprehension_tail(value, start, generator=True)
                    if args or not self.at("rparen"):
                        raise self.fail("generator expression must be parenthesized", start)
                args.append(value)
            if not self.at("comma"):
                break
            self.next()
        self.expect("rparen", ")", "')'")
        return tuple(args), tuple(kwargs)

    def comprehension_tail(self, element: Expr, start: Token, generator: bool = False, value: Expr | None = None) -> Expr:
        self.next()  # 'for'
        targets = self.targets()
        if not self.at_keyword("in"):
            raise self.fail("expected 'in'")
        self.next()
        iterable = self.or_expr()
        condition = None
        if self.at_keyword("if"):
            self.next()
            condition = self.or_expr()
        if self.at_keyword("for"):
            raise self.unsupported("comprehensions with several 'for' clauses")
        if self.at_keyword("if"):
            raise self.unsupported("comprehensions with several 'if' clauses")
        if value is not None:
            return DictComp(element, value, targets, iterable, condition, span=self.span_from(start))
        return ListComp(element, targets, iterable, condition, generator, span=self.span_from(start))

    def atom(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.fail("unexpected end of input")
        kind = tok.kind
        if kind == lx.IDENTIFIER:
            self.next()
            return Name(tok.text, span=tok.span)
        if kind == lx.KEYWORD:
            if tok.text in ("True", "False", "None"):
                self.next()
                return Literal({"True": True, "False": False, "None": None}[tok.text], span=tok.span)
            if tok.text in _UNSUPPORTED_STATEMENTS:
                raise self.unsupported(_UNSUPPORTED_STATEMENTS[tok.text])
            raise self.fail("invalid syntax")
        if kind == lx.INTEGER:
            self.next()
            return Literal(tok.value, span=tok.span)
        if kind == lx.FLOAT:
            raise self.unsupported("floating-point numbers")
        if kind == lx.BYTES:
            raise self.unsupported("bytes literals")
        if kind in (lx.STRING, lx.FSTRING):
            return self.strings()
        if kind == "lparen":
            return self.paren()
        if kind == "lbracket":
            return self.list_display()
        if kind == "lbrace":
            return self.dict_display()
        if kind == lx.OP and tok.text in ("*", "**"):
            raise self.unsupported("starred expressions")
        if kind == lx.OP and tok.text == "...":
            raise self.unsupported("Ellipsis")
        if kind == lx.NEWLINE or kind == lx.DEDENT:
            raise self.fail("invalid syntax: expression expected")
        raise self.fail("invalid syntax")

    def strings(self) -> Expr:
        start = self.peek()
        parts: list[str | Expr] = []
        is_f = False
        while self.at(lx.STRING) or self.at(lx.FSTRING) or self.at(lx.BYTES):
            tok = self.next()
            if tok.kind == lx.BYTES:
                raise self.unsupported("bytes literals", tok)
            if tok.kind == lx.STRING:
                parts.append(tok.value)
            else:
                is_f = True
                parts.extend(self.fstring_parts(tok))
        merged: list[str | Expr] = []
        for part in parts:
            if isinstance(part, str) and merged and isinstance(merged[-1], str):
                merged[-1] += part
            elif not (isinstance(part, str) and part == ""):
                merged.append(part)
        span = self.span_from(start)
        if not is_f:
            return Literal(merged[0] if merged else "", span=span)
        return FString(tuple(merged), span=span)

    def fstring_parts(self, tok: Token) -> list[str | Expr]:
        info: FStringBody = tok.value
        body = info.body
        parts: list[str | Expr] = []
        buf: list[str] = []

        def position(index: int) -> tuple[int, int]:
            before = body[:index]
            newlines = before.count("\n")
            if newlines:
                return info.line + newlines, len(before) - before.rfind("\n")
            return info.line, info.column + index

        def flush() -> None:
            if buf:
                parts.append(self.decode_fragment("".join(buf), info, tok))
                buf.clear()

        def bad(message: str, index: int, kind: str = MALFORMED) -> PlanSyntaxError:
            line, column = position(index)
            text = self._line(line)
            length = 1 if column <= len(text) else 0
            span = SourceSpan(line, min(column, len(text) + 1), length)
            return PlanSyntaxError(SyntaxDiagnostic(message, span, text.strip(), kind))

        i = 0
        n = len(body)
        while i < n:
            ch = body[i]
            if ch == "{":
                if body.startswith("{{", i):
                    buf.append("{")
                    i += 2
                    continue
                j = i + 1
                depth = 0
                quote = None
                while j < n:
                    c = body[j]
                    if quote:
                        if c == quote:
                            quote = None
                    elif c in "'\"":
                        quote = c
                    elif c in "([{":
                        depth += 1
                    elif c in ")]}":
                        if c == "}" and depth == 0:
                            break
                        depth -= 1
                    elif c == "\\":
                        raise bad("f-string expression part cannot include a backslash", j)
                    elif c == "#":
                        raise bad("f-string expression part cannot include '#'", j)
                    elif depth == 0 and c == "!" and not body.startswith("!=", j):
                        raise bad("unsupported construct: f-string conversions", j, UNSUPPORTED)
                    elif depth == 0 and c == ":":
                        raise bad("unsupported construct: f-string format specifications", j, UNSUPPORTED)
                    elif depth == 0 and c == "=" and body[j + 1 : j + 2] != "=" and body[j - 1] not in "=!<>":
                        raise bad("unsupported construct: f-string '=' specifiers", j, UNSUPPORTED)
                    j += 1
                if j >= n:
                    raise bad("f-string: expecting '}'", i)
                text = body[i + 1 : j]
                if not text.strip():
                    raise bad("f-string: empty expression not allowed", i)
                line, column = position(i + 1)
                sub_tokens = tokenize_fragment(text, line, column)
                sub = _Parser(sub_tokens, "\n".join(self.lines))
                sub.in_function = self.in_function
                sub.nesting = self.nesting
                expr = sub.expression()
                if sub.peek() is not None:
                    raise sub.fail("f-string: invalid syntax")
                flush()
                parts.append(expr)
                i = j + 1
            elif ch == "}":
                if body.startswith("}}", i):
                    buf.append("}")
                    i += 2
                    continue
                raise bad("f-string: single '}' is not allowed", i)
            elif ch == "\\" and i + 1 < n:
                buf.append(body[i : i + 2])
                i += 2
            else:
                buf.append(ch)
                i += 1
        flush()
        return parts

    def decode_fragment(self, text: str, info: FStringBody, tok: Token) -> str:
        if info.raw:
            return text
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                value = ast.literal_eval(info.quote + text + info.quote)
        except (SyntaxError, ValueError) as exc:
            raise self.fail(f"invalid string literal: {exc}", tok) from None
        if not isinstance(value, str):
            raise self.fail("invalid string literal", tok)
        return value

    def paren(self) -> Expr:
        start = self.next()
        if self.at("rparen"):
            raise self.unsupported("tuples", start)
        inner = self.expression()
        if self.at_keyword("for"):
            raise self.unsupported("generator expressions outside a call argument", start)
        if self.at("comma"):
            raise self.unsupported("tuples", start)
        self.expect("rparen", ")", "')'")
        return inner

    def list_display(self) -> Expr:
        start = self.next()
        if self.at("rbracket"):
            self.next()
            return ListLiteral((), span=self.span_from(start))
        first = self.element()
        if self.at_keyword("for"):
            comp = self.comprehension_tail(first, start)
            self.expect("rbracket", "]", "']'")
            return ListComp(comp.element, comp.targets, comp.iterable, comp.condition, span=self.span_from(start))
        items = [first]
        while self.at("comma"):
            self.next()
            if self.at("rbracket"):
                break
            items.append(self.element())
        self.expect("rbracket", "]", "']'")
        return ListLiteral(tuple(items), span=self.span_from(start))

    def element(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == lx.OP and tok.text in ("*", "**"):
            raise self.unsupported("starred expressions")
        return self.expression()

    def dict_display(self) -> Expr:
        start = self.next()
        if self.at("rbrace"):
            self.next()
            return DictLiteral((), span=self.span_from(start))
        key = self.element()
        if not self.at("colon"):
            raise self.unsupported("set literals", start)
        self.next()
        value = self.expression()
        if self.at_keyword("for"):
            comp = self.comprehension_tail(key, start, value=value)
            self.expect("rbrace", "}", "'}'")
            assert isinstance(comp, DictComp)
            return DictComp(comp.key, comp.value, comp.targets, comp.iterable, comp.condition, span=self.span_from(start))
        entries = [(key, value)]
        while self.at("comma"):
            self.next()
            if self.at("rbrace"):
                break
            k = self.element()
            self.expect("colon", ":", "':'")
            entries.append((k, self.expression()))
        self.expect("rbrace", "}", "'}'")
        return DictLiteral(tuple(entries), span=self.span_from(start))


def _describe(expr: Expr) -> str:
    if isinstance(expr, (Call, MethodCall)):
        return "function call"
    if isinstance(expr, Literal):
        return "literal"
    if isinstance(expr, FString):
        return "f-string expression"
    if isinstance(expr, (BinOp, UnaryOp)):
        return "expression"
    return "this expression"


def _children(node: object):
    for f in fields(node):
        if f.name == "span":
            continue
        value = getattr(node, f.name)
        stack = [value]
        while stack:
            item = stack.pop()
            if is_dataclass(item):
                yield item
            elif isinstance(item, tuple):
                stack.extend(item)


def _validate(statements: list[Stmt], source: str) -> None:
    """Post-parse checks: tree depth and the builtin whitelist."""
    defined = {s.name for s in statements if isinstance(s, FunctionDef)}
    lines = source.split("\n")
    stack: list[tuple[object, int]] = [(s, 1) for s in statements]
    while stack:
        node, depth = stack.pop()
        span = getattr(node, "span", None)
        if depth > MAX_TREE_DEPTH:
            raise PlanSyntaxError(
                SyntaxDiagnostic("expression is too deeply nested", span, _line_of(lines, span))
            )
        if isinstance(node, FunctionDef):
            defined.add(node.name)
        if isinstance(node, Call):
            allowed = node.func in TOOLS or node.func in BUILTINS or node.func in MODULE_FUNCTIONS
            if not allowed and node.func in _PYTHON_BUILTINS and node.func not in defined:
                raise PlanSyntaxError(
                    SyntaxDiagnostic(
                        f"unsupported construct: built-in function '{node.func}()'",
                        span,
                        _line_of(lines, span),
                        UNSUPPORTED,
                    )
                )
        stack.extend((child, depth + 1) for child in _children(node))


def _line_of(lines: list[str], span: SourceSpan) -> str:
    return lines[span.line - 1].strip() if 0 < span.line <= len(lines) else ""


def parse_tokens(tokens: list[Token], source: str) -> PlanProgram:
    parser = _Parser(tokens, source)
    statements = parser.program()
    _validate(statements, source)
    return PlanProgram(tuple(statements), source)


def parse_program(source: str) -> PlanProgram:
    """Parse plan source text (optionally wrapped in a code fence)."""
    text = strip_code_fences(source)
    try:
        tokens = lx._Lexer(text).run()
        return parse_tokens(tokens, text)
    except RecursionError:
        raise PlanSyntaxError(
            SyntaxDiagnostic("program is too deeply nested", SourceSpan(1, 1, 0), "")
        ) from None


def parse_expression(source: str) -> Expr:
    tokens = tokenize_fragment(source, 1, 1)
    parser = _Parser(tokens, source)
    expr = parser.expression()
    if parser.peek() is not None:
        raise parser.fail("invalid syntax")
    return expr
