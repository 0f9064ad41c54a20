"""Tree-walking interpreter for parsed plans."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Iterator, Protocol

from ..dsl.nodes import (
    NO_SPAN,
    Assign,
    BinOp,
    Call,
    DictComp,
    DictLiteral,
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
    UnaryOp,
)
from ..errors import ToolFailure
from . import errors as E
from . import trace as T
from .errors import PlanRuntimeError, StructuredError
from .trace import ExecutionTrace
from .values import DocumentSet, FunctionValue, ModuleValue, render_value, summarize_value, type_name

if TYPE_CHECKING:
    from ..tools import AnswerOutcome

MAX_SEQUENCE_LENGTH = 10_000_000
MAX_INT_BITS = 100_000

_NULL_FINAL = object()


@dataclass(frozen=True)
class ExecutionLimits:
    max_tool_calls: int = 50
    max_statements: int = 10_000
    wall_clock_s: float = 300.0
    max_recursion: int = 32

    def __post_init__(self) -> None:
        for name in ("max_tool_calls", "max_statements", "wall_clock_s", "max_recursion"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class ToolHost(Protocol):
    def resolve_k(self, requested: int | None) -> int: ...

    def retrieve(self, query: str, k: int) -> DocumentSet: ...

    def answer(self, query: str, docs: DocumentSet | None) -> AnswerOutcome: ...


@dataclass
class ExecutionOutcome:
    final_answer: str | None
    trace: ExecutionTrace
    error: StructuredError | None = None
    final_value: Any = None

    @property
    def ok(self) -> bool:
        return self.error is None


class Environment:
    def __init__(self, parent: Environment | None = None, bindings: dict[str, Any] | None = None):
        self.bindings: dict[str, Any] = dict(bindings or {})
        self.parent = parent

    def lookup(self, name: str) -> Any:
        env: Environment | None = self
        while env is not None:
            if name in env.bindings:
                return env.bindings[name]
            env = env.parent
        raise KeyError(name)

    def contains(self, name: str) -> bool:
        try:
            self.lookup(name)
        except KeyError:
            return False
        return True

    def assign(self, name: str, value: Any) -> None:
        self.bindings[name] = value


class _Return(Exception):
    def __init__(self, value: Any):
        self.value = value


@dataclass
class _Frame:
    name: str
    line: int
    source: str


_ALLOWED_METHODS: dict[str, tuple[type, ...]] = {
    "split": (str,),
    "strip": (str,),
    "lower": (str,),
    "upper": (str,),
    "join": (str,),
    "append": (list,),
    "values": (dict,),
    "keys": (dict,),
    "items": (dict,),
    "get": (dict,),
    "group": (re.Match,),
}

_NATIVE_ERRORS: tuple[tuple[type[BaseException], str], ...] = (
    (ZeroDivisionError, E.ZERO_DIVISION),
    (KeyError, E.KEY_ERROR),
    (IndexError, E.INDEX_ERROR),
    (TypeError, E.TYPE_ERROR),
    (AttributeError, E.TYPE_ERROR),
    (re.error, E.VALUE_ERROR),
    (ValueError, E.VALUE_ERROR),
    (RuntimeError, E.VALUE_ERROR),
    (OverflowError, E.VALUE_ERROR),
)


def _native_kind(exc: BaseException) -> str:
    for cls, kind in _NATIVE_ERRORS:
        if isinstance(exc, cls):
            return kind
    return E.VALUE_ERROR


def _native_message(exc: BaseException) -> str:
    # KeyError's str() is the repr of the missing key, as in the reference display.
    return str(exc) if str(exc) else type(exc).__name__


def _strip_comment(text: str) -> str:
    """Drop a trailing ``#`` comment that is not inside a string literal."""
    quote = ""
    escaped = False
    for i, ch in enumerate(text):
        if quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = ""
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return text[:i].rstrip()
    return text


class Interpreter:
    def __init__(
        self,
        program: PlanProgram,
        tools: ToolHost | None,
        limits: ExecutionLimits | None = None,
        trace: ExecutionTrace | None = None,
        repair_round: int = 0,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.program = program
        self.tools = tools
        self.limits = limits or ExecutionLimits()
        self.trace = trace if trace is not None else ExecutionTrace()
        self.repair_round = repair_round
        self.clock = clock
        self.lines = program.source.splitlines()
        self.globals = Environment()
        self.tool_calls = 0
        self.statements = 0
        self.started = 0.0
        self.frames: list[_Frame] = []
        self.loops: list[For] = []
        self.last_answer: Any = _NULL_FINAL

    # -- bookkeeping -------------------------------------------------------

    def source_of(self, stmt) -> str:
        return self.program.statement_source(stmt)

    def header_of(self, line: int) -> str:
        return _strip_comment(self.lines[line - 1]).strip() if 0 < line <= len(self.lines) else ""

    def tick(self, span: SourceSpan) -> None:
        self.statements += 1
        if self.statements > self.limits.max_statements:
            raise PlanRuntimeError(
                E.BUDGET_EXCEEDED,
                f"statement budget of {self.limits.max_statements} exhausted{self.loop_context()}",
                span,
            )
        if self.clock() - self.started > self.limits.wall_clock_s:
            raise PlanRuntimeError(
                E.TIMEOUT, f"wall-clock budget of {self.limits.wall_clock_s:g} s exceeded{self.loop_context()}", span
            )

    def loop_context(self) -> str:
        if not self.loops:
            return ""
        loop = self.loops[-1]
        return f" inside the loop at line {loop.span.line}: {self.header_of(loop.span.line)}"

    def count_tool_call(self, name: str, span: SourceSpan) -> None:
        self.tool_calls += 1
        if self.tool_calls > self.limits.max_tool_calls:
            raise PlanRuntimeError(
                E.BUDGET_EXCEEDED,
                f"tool-call budget of {self.limits.max_tool_calls} exhausted by {name}() call number "
                f"{self.tool_calls}{self.loop_context()}",
                span,
            )

    def add(self, kind: str, stmt_source: str, line: int, **fields: Any) -> None:
        self.trace.add(kind, stmt_source, line, repair_round=self.repair_round, **fields)

    # -- entry point -------------------------------------------------------

    def run(self) -> ExecutionOutcome:
        self.started = self.clock()
        self.frames = [_Frame("<module>", 0, "")]
        try:
            self.exec_block(self.program.statements, self.globals)
        except PlanRuntimeError as exc:
            return self.fail(exc)
        except RecursionError:
            return self.fail(PlanRuntimeError(E.BUDGET_EXCEEDED, "evaluation nested too deeply", None))
        final = self.final_value()
        if final is _NULL_FINAL:
            return ExecutionOutcome(None, self.trace, None, None)
        return ExecutionOutcome(render_value(final), self.trace, None, final)

    def final_value(self) -> Any:
        for name in ("final_answer", "final"):
            if name in self.globals.bindings:
                return self.globals.bindings[name]
        return self.last_answer

    def fail(self, exc: PlanRuntimeError) -> ExecutionOutcome:
        frames = exc.frames or self.frames
        frame = frames[-1]
        span = exc.span or SourceSpan(max(frame.line, 1), 1)
        error = StructuredError(exc.kind, exc.message, span, self.render_traceback(exc, frames))
        self.add(
            T.ERROR,
            frame.source,
            frame.line or span.line,
            inputs={},
            output={"kind": error.kind, "message": error.message},
            chat_calls=exc.chat_calls,
        )
        return ExecutionOutcome(None, self.trace, error, None)

    def render_traceback(self, exc: PlanRuntimeError, frames: list[_Frame]) -> str:
        lines = ["Traceback (most recent call last):"]
        for frame in frames:
            if frame.line <= 0:
                continue
            lines.append(f'  File "<plan>", line {frame.line}, in {frame.name}')
            header = self.header_of(frame.line)
            if header:
                lines.append(f"    {header}")
        display = E.StructuredError(exc.kind, exc.message).display_kind
        lines.append(f"{display}: {exc.message}")
        return "\n".join(lines)

    # -- statements --------------------------------------------------------

    def exec_block(self, body, env: Environment) -> None:
        for stmt in body:
            self.exec_stmt(stmt, env)

    def exec_stmt(self, stmt, env: Environment) -> None:
        frame = self.frames[-1]
        frame.line = stmt.span.line
        frame.source = self.source_of(stmt)
        self.tick(stmt.span)
        started = self.clock()

        if isinstance(stmt, Assign):
            value = self.eval(stmt.value, env)
            if isinstance(stmt.target, Name):
                env.assign(stmt.target.id, value)
                target = stmt.target.id
            else:
                self.assign_index(stmt.target, value, env)
                target = self.describe_target(stmt.target)
            self.restore(frame, stmt)
            self.add(T.ASSIGN, frame.source, stmt.span.line, inputs={"target": target},
                     output=summarize_value(value), ms=self.elapsed(started))
        elif isinstance(stmt, ExprStmt):
            value = self.eval(stmt.expr, env)
            self.restore(frame, stmt)
            self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": "expression"},
                     output=summarize_value(value), ms=self.elapsed(started))
        elif isinstance(stmt, Import):
            env.assign(stmt.module, ModuleValue(stmt.module))
            self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": "import"},
                     output=stmt.module, ms=self.elapsed(started))
        elif isinstance(stmt, FunctionDef):
            env.assign(stmt.name, FunctionValue(stmt.name, stmt.params, stmt.body))
            self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": "def"},
                     output=f"<function {stmt.name}>", ms=self.elapsed(started))
        elif isinstance(stmt, Return):
            value = None if stmt.value is None else self.eval(stmt.value, env)
            self.restore(frame, stmt)
            self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": "return"},
                     output=summarize_value(value), ms=self.elapsed(started))
            raise _Return(value)
        elif isinstance(stmt, If):
            self.exec_if(stmt, env, frame)
        elif isinstance(stmt, For):
            self.exec_for(stmt, env, frame)
        else:  # pragma: no cover - parser guarantees the node set
            raise PlanRuntimeError(E.UNSUPPORTED, f"unsupported statement {type(stmt).__name__}", stmt.span)

    def restore(self, frame: _Frame, stmt) -> None:
        # Nested calls move the frame pointer; put it back for the trace entry.
        frame.line = stmt.span.line
        frame.source = self.source_of(stmt)

    def elapsed(self, started: float) -> float:
        return round((self.clock() - started) * 1000.0, 3)

    def exec_if(self, stmt: If, env: Environment, frame: _Frame) -> None:
        branches = [(stmt.test, stmt.body)] + list(stmt.elifs)
        for index, (test, body) in enumerate(branches):
            started = self.clock()
            outcome = self.truth(self.eval(test, env), test.span)
            self.restore(frame, stmt)
            label = "if" if index == 0 else f"elif#{index}"
            self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": label},
                     output=str(outcome), ms=self.elapsed(started))
            if outcome:
                self.exec_block(body, env)
                return
        if stmt.orelse:
            self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": "else"}, output="True")
            self.exec_block(stmt.orelse, env)

    def exec_for(self, stmt: For, env: Environment, frame: _Frame) -> None:
        iterable = self.eval(stmt.iterable, env)
        iterator = self.iterate(iterable, stmt.iterable.span)
        self.loops.append(stmt)
        try:
            while True:
                try:
                    item = next(iterator)
                except StopIteration:
                    break
                except Exception as exc:  # e.g. dict changed size during iteration
                    raise PlanRuntimeError(_native_kind(exc), _native_message(exc), stmt.span) from None
                self.restore(frame, stmt)
                self.tick(stmt.span)
                self.bind_targets(stmt.targets, item, env, stmt.span)
                self.add(T.CONTROL, frame.source, stmt.span.line, inputs={"statement": "for"},
                         output=summarize_value(item))
                self.exec_block(stmt.body, env)
        finally:
            self.loops.pop()

    def truth(self, value: Any, span: SourceSpan) -> bool:
        try:
            return bool(value)
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), _native_message(exc), span) from None

    def iterate(self, value: Any, span: SourceSpan) -> Iterator[Any]:
        if isinstance(value, (FunctionValue, ModuleValue)):
            raise PlanRuntimeError(E.TYPE_ERROR, f"'{type_name(value)}' object is not iterable", span)
        try:
            return iter(value)
        except TypeError as exc:
            raise PlanRuntimeError(E.TYPE_ERROR, _native_message(exc), span) from None

    def bind_targets(self, targets: tuple[str, ...], item: Any, env: Environment, span: SourceSpan) -> None:
        if len(targets) == 1:
            env.assign(targets[0], item)
            return
        if isinstance(item, (int, bool)) or item is None or isinstance(item, (FunctionValue, ModuleValue, re.Match)):
            raise PlanRuntimeError(E.TYPE_ERROR, f"cannot unpack non-iterable {type_name(item)} object", span)
        values = []
        for value in self.iterate(item, span):
            values.append(value)
            if len(values) > len(targets):
                raise PlanRuntimeError(E.VALUE_ERROR, f"too many values to unpack (expected {len(targets)})", span)
        if len(values) < len(targets):
            raise PlanRuntimeError(
                E.VALUE_ERROR, f"not enough values to unpack (expected {len(targets)}, got {len(values)})", span
            )
        for name, value in zip(targets, values):
            env.assign(name, value)

    def describe_target(self, target: Index) -> str:
        from ..dsl.render import render_expr

        return render_expr(target)

    def assign_index(self, target: Index, value: Any, env: Environment) -> None:
        receiver = self.eval(target.receiver, env)
        key = self.eval(target.key, env)
        if isinstance(receiver, DocumentSet):
            raise PlanRuntimeError(E.TYPE_ERROR, "'DocumentSet' object does not support item assignment", target.span)
        if not isinstance(receiver, (list, dict)):
            raise PlanRuntimeError(
                E.TYPE_ERROR, f"'{type_name(receiver)}' object does not support item assignment", target.span
            )
        try:
            receiver[key] = value
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), self.index_message(exc, receiver, True), target.span) from None

    @staticmethod
    def index_message(exc: Exception, receiver: Any, store: bool) -> str:
        if isinstance(exc, IndexError) and isinstance(receiver, list) and store:
            return "list assignment index out of range"
        return _native_message(exc)

    # -- expressions -------------------------------------------------------

    def eval(self, node, env: Environment) -> Any:
        method = getattr(self, "eval_" + type(node).__name__)
        return method(node, env)

    def eval_Literal(self, node: Literal, env: Environment) -> Any:
        return node.value

    def eval_Name(self, node: Name, env: Environment) -> Any:
        try:
            return env.lookup(node.id)
        except KeyError:
            raise PlanRuntimeError(E.NAME_ERROR, f"name '{node.id}' is not defined", node.span) from None

    def eval_ListLiteral(self, node: ListLiteral, env: Environment) -> Any:
        return [self.eval(e, env) for e in node.elements]

    def eval_DictLiteral(self, node: DictLiteral, env: Environment) -> Any:
        out: dict = {}
        for k, v in node.entries:
            key = self.eval(k, env)
            value = self.eval(v, env)
            self.store(out, key, value, k.span)
        return out

    def store(self, mapping: dict, key: Any, value: Any, span: SourceSpan) -> None:
        try:
            mapping[key] = value
        except TypeError as exc:
            raise PlanRuntimeError(E.TYPE_ERROR, _native_message(exc), span) from None

    def eval_FString(self, node: FString, env: Environment) -> str:
        pieces = []
        for part in node.parts:
            if isinstance(part, str):
                pieces.append(part)
            else:
                pieces.append(render_value(self.eval(part, env)))
        text = "".join(pieces)
        self.check_size(len(text), node.span)
        return text

    def eval_IfExp(self, node: IfExp, env: Environment) -> Any:
        if self.truth(self.eval(node.test, env), node.test.span):
            return self.eval(node.body, env)
        return self.eval(node.orelse, env)

    def eval_UnaryOp(self, node: UnaryOp, env: Environment) -> Any:
        value = self.eval(node.operand, env)
        if node.op == "not":
            return not self.truth(value, node.span)
        if isinstance(value, bool) or isinstance(value, int):
            return -value
        raise PlanRuntimeError(E.TYPE_ERROR, f"bad operand type for unary -: '{type_name(value)}'", node.span)

    def eval_BinOp(self, node: BinOp, env: Environment) -> Any:
        op = node.op
        if op == "and":
            left = self.eval(node.left, env)
            return self.eval(node.right, env) if self.truth(left, node.span) else left
        if op == "or":
            left = self.eval(node.left, env)
            return left if self.truth(left, node.span) else self.eval(node.right, env)
        left = self.eval(node.left, env)
        right = self.eval(node.right, env)
        return self.binary(op, left, right, node.span)

    def check_size(self, length: int, span: SourceSpan) -> None:
        if length > MAX_SEQUENCE_LENGTH:
            raise PlanRuntimeError(
                E.BUDGET_EXCEEDED, f"value size limit of {MAX_SEQUENCE_LENGTH} elements exceeded", span
            )

    def binary(self, op: str, left: Any, right: Any, span: SourceSpan) -> Any:
        for value in (left, right):
            if isinstance(value, (FunctionValue, ModuleValue)) and op not in ("==", "!="):
                raise PlanRuntimeError(
                    E.TYPE_ERROR,
                    f"unsupported operand type(s) for {op}: '{type_name(left)}' and '{type_name(right)}'",
                    span,
                )
        if op == "*" and (isinstance(left, (str, list)) or isinstance(right, (str, list))):
            if isinstance(left, int) or isinstance(right, int):
                raise PlanRuntimeError(E.UNSUPPORTED, "sequence repetition with '*' is not supported", span)
        if op == "%" and isinstance(left, str):
            raise PlanRuntimeError(E.UNSUPPORTED, "printf-style string formatting with '%' is not supported", span)
        if op == "+" and isinstance(left, (str, list)) and isinstance(right, type(left)):
            self.check_size(len(left) + len(right), span)
        if op in ("*", "+", "-") and isinstance(left, int) and isinstance(right, int):
            bits = left.bit_length() + right.bit_length() if op == "*" else max(left.bit_length(), right.bit_length())
            if bits > MAX_INT_BITS:
                raise PlanRuntimeError(E.BUDGET_EXCEEDED, "integer size limit exceeded", span)
        try:
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if op == "//":
                return left // right
            if op == "%":
                return left % right
            if op == "==":
                return left == right
            if op == "!=":
                return left != right
            if op == "<":
                return left < right
            if op == ">":
                return left > right
            if op == "<=":
                return left <= right
            if op == ">=":
                return left >= right
            if op == "in":
                return left in right
            if op == "not in":
                return left not in right
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), _native_message(exc), span) from None
        raise PlanRuntimeError(E.UNSUPPORTED, f"operator {op!r} is not supported", span)

    def eval_Index(self, node: Index, env: Environment) -> Any:
        receiver = self.eval(node.receiver, env)
        key = self.eval(node.key, env)
        if isinstance(receiver, re.Match):
            raise PlanRuntimeError(E.UNSUPPORTED, "match objects only support .group()", node.span)
        if isinstance(receiver, (FunctionValue, ModuleValue)):
            raise PlanRuntimeError(E.TYPE_ERROR, f"'{type_name(receiver)}' object is not subscriptable", node.span)
        if isinstance(key, slice):  # pragma: no cover - slices cannot be written
            raise PlanRuntimeError(E.UNSUPPORTED, "slices are not supported", node.span)
        try:
            return receiver[key]
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), _native_message(exc), node.span) from None

    def comprehension_items(self, targets, iterable_node, condition, env: Environment, span: SourceSpan):
        iterable = self.eval(iterable_node, env)
        iterator = self.iterate(iterable, iterable_node.span)
        while True:
            try:
                item = next(iterator)
            except StopIteration:
                return
            except Exception as exc:
                raise PlanRuntimeError(_native_kind(exc), _native_message(exc), span) from None
            self.tick(span)
            scope = Environment(env)
            self.bind_targets(targets, item, scope, span)
            if condition is None or self.truth(self.eval(condition, scope), condition.span):
                yield scope

    def eval_ListComp(self, node: ListComp, env: Environment) -> Any:
        scopes = self.comprehension_items(node.targets, node.iterable, node.condition, env, node.span)
        if node.generator:
            return (self.eval(node.element, scope) for scope in scopes)
        out = []
        for scope in scopes:
            out.append(self.eval(node.element, scope))
        return out

    def eval_DictComp(self, node: DictComp, env: Environment) -> Any:
        out: dict = {}
        for scope in self.comprehension_items(node.targets, node.iterable, node.condition, env, node.span):
            key = self.eval(node.key, scope)
            self.store(out, key, self.eval(node.value, scope), node.span)
        return out

    def eval_MethodCall(self, node: MethodCall, env: Environment) -> Any:
        receiver = self.eval(node.receiver, env)
        args = [self.eval(a, env) for a in node.args]
        kwargs = {k: self.eval(v, env) for k, v in node.kwargs}
        allowed = _ALLOWED_METHODS.get(node.method, ())
        if not isinstance(receiver, allowed) or isinstance(receiver, bool):
            raise PlanRuntimeError(
                E.TYPE_ERROR, f"'{type_name(receiver)}' object has no attribute '{node.method}'", node.span
            )
        if isinstance(receiver, re.Match) and (args or kwargs):
            raise PlanRuntimeError(E.UNSUPPORTED, "match objects only support .group() without arguments", node.span)
        try:
            result = getattr(receiver, node.method)(*args, **kwargs)
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), _native_message(exc), node.span) from None
        if isinstance(result, str):
            self.check_size(len(result), node.span)
        return result

    def eval_Call(self, node: Call, env: Environment) -> Any:
        func = node.func
        if func == "re.search":
            return self.call_re_search(node, env)
        try:
            bound = env.lookup(func)
        except KeyError:
            bound = None
        else:
            if isinstance(bound, FunctionValue):
                return self.call_function(bound, node, env)
            raise PlanRuntimeError(E.TYPE_ERROR, f"'{type_name(bound)}' object is not callable", node.span)
        if func == "retrieve":
            return self.call_retrieve(node, env)
        if func == "answer":
            return self.call_answer(node, env)
        builtin = _BUILTINS.get(func)
        if builtin is None:
            raise PlanRuntimeError(E.NAME_ERROR, f"name '{func}' is not defined", node.span)
        args = [self.eval(a, env) for a in node.args]
        kwargs = {k: self.eval(v, env) for k, v in node.kwargs}
        for value in args:
            if isinstance(value, (FunctionValue, ModuleValue)) and func not in ("str",):
                raise PlanRuntimeError(E.TYPE_ERROR, f"{func}() got an unsupported argument of type '{type_name(value)}'", node.span)
        try:
            result = builtin(*args, **kwargs)
        except PlanRuntimeError:
            raise
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), _native_message(exc), node.span) from None
        if isinstance(result, str):
            self.check_size(len(result), node.span)
        return result

    def call_re_search(self, node: Call, env: Environment) -> Any:
        module = env.bindings.get("re") if "re" in env.bindings else (self.globals.bindings.get("re"))
        if not isinstance(module, ModuleValue):
            raise PlanRuntimeError(E.NAME_ERROR, "name 're' is not defined", node.span)
        args = [self.eval(a, env) for a in node.args]
        kwargs = {k: self.eval(v, env) for k, v in node.kwargs}
        try:
            return re.search(*args, **kwargs)
        except Exception as exc:
            raise PlanRuntimeError(_native_kind(exc), _native_message(exc), node.span) from None

    def call_function(self, function: FunctionValue, node: Call, env: Environment) -> Any:
        args = [self.eval(a, env) for a in node.args]
        kwargs = {k: self.eval(v, env) for k, v in node.kwargs}
        params = function.params
        name = function.name
        if len(args) > len(params):
            noun = "argument" if len(params) == 1 else "arguments"
            verb = "was" if len(args) == 1 else "were"
            raise PlanRuntimeError(
                E.TYPE_ERROR,
                f"{name}() takes {len(params)} positional {noun} but {len(args)} {verb} given",
                node.span,
            )
        bindings = dict(zip(params, args))
        for key, value in kwargs.items():
            if key not in params:
                raise PlanRuntimeError(E.TYPE_ERROR, f"{name}() got an unexpected keyword argument '{key}'", node.span)
            if key in bindings:
                raise PlanRuntimeError(E.TYPE_ERROR, f"{name}() got multiple values for argument '{key}'", node.span)
            bindings[key] = value
        missing = [p for p in params if p not in bindings]
        if missing:
            noun = "argument" if len(missing) == 1 else "arguments"
            quoted = [f"'{m}'" for m in missing]
            listed = quoted[0] if len(quoted) == 1 else ", ".join(quoted[:-1]) + " and " + quoted[-1]
            raise PlanRuntimeError(
                E.TYPE_ERROR, f"{name}() missing {len(missing)} required positional {noun}: {listed}", node.span
            )
        if len(self.frames) > self.limits.max_recursion:
            raise PlanRuntimeError(
                E.BUDGET_EXCEEDED, f"recursion depth limit of {self.limits.max_recursion} exceeded", node.span
            )
        frame_env = Environment(self.globals, bindings)
        self.frames.append(_Frame(name, function.body[0].span.line if function.body else 0, ""))
        try:
            self.exec_block(function.body, frame_env)
        except _Return as ret:
            return ret.value
        except PlanRuntimeError as exc:
            if exc.frames is None:
                exc.frames = [_Frame(f.name, f.line, f.source) for f in self.frames]
            raise
        finally:
            self.frames.pop()
        return None

    # -- tools -------------------------------------------------------------

    def tool_args(self, node: Call, env: Environment, name: str, params: tuple[str, ...]) -> dict[str, Any]:
        args = [self.eval(a, env) for a in node.args]
        kwargs = {k: self.eval(v, env) for k, v in node.kwargs}
        if len(args) > len(params):
            raise PlanRuntimeError(
                E.TYPE_ERROR, f"{name}() takes at most {len(params)} arguments ({len(args)} given)", node.span
            )
        bound = dict(zip(params, args))
        for key, value in kwargs.items():
            if key not in params:
                raise PlanRuntimeError(E.TYPE_ERROR, f"{name}() got an unexpected keyword argument '{key}'", node.span)
            if key in bound:
                raise PlanRuntimeError(E.TYPE_ERROR, f"{name}() got multiple values for argument '{key}'", node.span)
            bound[key] = value
        if "query" not in bound:
            raise PlanRuntimeError(E.TYPE_ERROR, f"{name}() missing required argument 'query'", node.span)
        if not isinstance(bound["query"], str):
            raise PlanRuntimeError(
                E.TYPE_ERROR, f"{name}() query must be str, not {type_name(bound['query'])}", node.span
            )
        if not bound["query"].strip():
            raise PlanRuntimeError(E.VALUE_ERROR, f"{name}() query must not be empty", node.span)
        return bound

    def require_tools(self, node: Call) -> ToolHost:
        if self.tools is None:
            raise PlanRuntimeError(E.TOOL_FAILURE, "no tool host is configured", node.span)
        return self.tools

    def call_retrieve(self, node: Call, env: Environment) -> DocumentSet:
        bound = self.tool_args(node, env, "retrieve", ("query", "topk"))
        requested = bound.get("topk")
        if requested is not None and (not isinstance(requested, int) or isinstance(requested, bool)):
            raise PlanRuntimeError(E.TYPE_ERROR, f"retrieve() topk must be int, not {type_name(requested)}", node.span)
        tools = self.require_tools(node)
        k = tools.resolve_k(requested)
        if not 1 <= k <= 100:
            raise PlanRuntimeError(E.VALUE_ERROR, f"retrieve() topk must be between 1 and 100, got {k}", node.span)
        self.count_tool_call("retrieve", node.span)
        started = self.clock()
        try:
            docs = tools.retrieve(bound["query"], k)
        except ToolFailure as exc:
            raise PlanRuntimeError(E.TOOL_FAILURE, str(exc), node.span) from None
        frame = self.frames[-1]
        self.add(
            T.TOOL_RETRIEVE,
            frame.source,
            frame.line,
            inputs={"query": bound["query"], "topk": requested},
            output=[d.to_dict() for d in docs.docs],
            k=k,
            ms=self.elapsed(started),
        )
        return docs

    def call_answer(self, node: Call, env: Environment) -> str:
        bound = self.tool_args(node, env, "answer", ("query", "docs"))
        docs = bound.get("docs")
        if docs is not None and not isinstance(docs, DocumentSet):
            raise PlanRuntimeError(
                E.TYPE_ERROR,
                f"answer() docs must be the result of retrieve() or None, not {type_name(docs)}",
                node.span,
            )
        tools = self.require_tools(node)
        self.count_tool_call("answer", node.span)
        started = self.clock()
        try:
            outcome = tools.answer(bound["query"], docs)
        except ToolFailure as exc:
            fault = PlanRuntimeError(E.TOOL_FAILURE, str(exc), node.span)
            fault.chat_calls = exc.chat_calls
            raise fault from None
        frame = self.frames[-1]
        total_ms = self.elapsed(started)
        boost_ms = outcome.boost.ms if outcome.boost is not None else 0.0
        self.add(
            T.TOOL_ANSWER,
            frame.source,
            frame.line,
            inputs={
                "query": bound["query"],
                "mode": outcome.mode,
                "docs": [d.doc_id for d in docs.docs] if docs is not None else None,
            },
            output=outcome.first_answer,
            k=docs.k if docs is not None else None,
            ms=round(max(0.0, total_ms - boost_ms), 3),
            chat_calls=outcome.chat_calls,
        )
        if outcome.boost is not None:
            boost = outcome.boost
            self.add(
                T.ADAPTIVE_RERETRIEVE,
                frame.source,
                frame.line,
                inputs={"query": boost.docs.query, "answer_query": bound["query"], "previous_k": docs.k},
                output={"documents": [d.to_dict() for d in boost.docs.docs], "answer": boost.answer},
                k=boost.docs.k,
                ms=boost.ms,
                chat_calls=boost.chat_calls,
            )
        if len(self.frames) == 1:
            self.last_answer = outcome.answer
        return outcome.answer


def _int(*args, **kwargs):
    for value in args:
        if isinstance(value, (list, dict, DocumentSet)) or value is None:
            raise TypeError(
                f"int() argument must be a string, a bytes-like object or a real number, not '{type_name(value)}'"
            )
    return int(*args, **kwargs)


def _len(*args, **kwargs):
    return len(*args, **kwargs)


def _str(*args, **kwargs):
    if len(args) == 1 and not kwargs:
        return render_value(args[0])
    return str(*args, **kwargs)


_BUILTINS: dict[str, Callable[..., Any]] = {
    "int": _int,
    "str": _str,
    "len": _len,
    "all": all,
    "any": any,
    "range": range,
}


def execute(
    program: PlanProgram,
    tools: ToolHost | None = None,
    limits: ExecutionLimits | None = None,
    trace: ExecutionTrace | None = None,
    repair_round: int = 0,
) -> ExecutionOutcome:
    """Run *program*; never raises for faults inside the program."""
    return Interpreter(program, tools, limits, trace, repair_round).run()
