"""Decompose, Plan and Answer agents.

Each agent is a stateless policy over a chat client: render a template,
call the model, parse the reply, retry within a fixed bound. Every method
reports how many chat calls it spent so totals can be audited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dsl import PlanProgram, PlanSyntaxError, SyntaxDiagnostic, parse_program, strip_code_fences
from .errors import PreconditionError, ToolFailure
from .interpreter.errors import SYNTAX_ERROR, StructuredError
from .interpreter.values import DocumentSet
from .llm import templates as T
from .llm.client import ChatClient, ChatMessage, GenerationParams, PromptTag
from .llm.extract import ExtractionError, ParseError, extract_answer_span, parse_subquery_json
from .tools import EMPTY_EVIDENCE_ANSWER, format_docs

DECOMPOSE_ATTEMPTS = 3
SYNTAX_RETRIES = 3
MAX_FIX_ROUNDS = 3
ANSWER_ATTEMPTS = 2

PARSED = "parsed"
FALLBACK_ORIGINAL = "fallback-original"
# Merged mode: no separate decomposition call; the planner sees the question alone.
MERGED = "merged"

INITIAL = "initial"
SYNTAX_RETRY = "syntax-retry"
RUNTIME_REPAIR = "runtime-repair"


@dataclass(frozen=True)
class SubQueryList:
    sub_queries: tuple[str, ...]
    source: str = PARSED
    chat_calls: int = 0

    def __post_init__(self) -> None:
        if not self.sub_queries:
            raise ValueError("a sub-query list is never empty")
        if self.source not in (PARSED, FALLBACK_ORIGINAL, MERGED):
            raise ValueError(f"unknown sub-query source {self.source!r}")
        if self.source != PARSED and len(self.sub_queries) != 1:
            raise ValueError(f"{self.source} lists hold exactly the original question")

    def __len__(self) -> int:
        return len(self.sub_queries)

    def render(self) -> str:
        return T.format_sub_queries(self.sub_queries)


@dataclass(frozen=True)
class PlanAttempt:
    source: str
    kind: str
    round: int
    program: PlanProgram = field(compare=False, repr=False)
    chat_calls: int = 1
    syntax_retries: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (INITIAL, SYNTAX_RETRY, RUNTIME_REPAIR):
            raise ValueError(f"unknown attempt kind {self.kind!r}")
        if self.syntax_retries > SYNTAX_RETRIES:
            raise ValueError(f"at most {SYNTAX_RETRIES} syntax retries per attempt")


class PlanFailure(Exception):
    """The planner produced unparseable code on every allowed try."""

    def __init__(self, diagnostic: SyntaxDiagnostic, source: str, chat_calls: int, round: int):
        super().__init__(f"planner output failed to parse {chat_calls} times: {diagnostic.render()}")
        self.diagnostic = diagnostic
        self.source = source
        self.chat_calls = chat_calls
        self.round = round

    def structured(self) -> StructuredError:
        return StructuredError(SYNTAX_ERROR, self.diagnostic.message, self.diagnostic.span, self.diagnostic.render())


@dataclass(frozen=True)
class AgentParams:
    decompose: GenerationParams = field(default_factory=GenerationParams)
    plan: GenerationParams = field(default_factory=GenerationParams)
    answer: GenerationParams = field(default_factory=GenerationParams)


class DecomposeAgent:
    def __init__(self, client: ChatClient, params: GenerationParams | None = None):
        self.client = client
        self.params = params or GenerationParams()

    def decompose(self, question: str) -> SubQueryList:
        if not question.strip():
            raise PreconditionError("decompose() needs a non-empty question")
        messages = [
            ChatMessage("system", T.render(T.DECOMPOSE_SYSTEM)),
            ChatMessage("user", T.render(T.DECOMPOSE_USER, query=question)),
        ]
        tag = PromptTag(T.DECOMPOSE_USER, question)
        calls = 0
        transport_error: ToolFailure | None = None
        replied = False
        for _ in range(DECOMPOSE_ATTEMPTS):
            try:
                raw = self.client.chat(messages, self.params, tag)
            except ToolFailure as exc:
                transport_error = exc
                continue
            calls += 1
            replied = True
            try:
                return SubQueryList(tuple(parse_subquery_json(raw)), PARSED, calls)
            except ParseError:
                messages = messages + [
                    ChatMessage("assistant", raw),
                    ChatMessage("user", T.render(T.DECOMPOSE_CORRECTION)),
                ]
        if not replied and transport_error is not None:
            raise transport_error
        return SubQueryList((question,), FALLBACK_ORIGINAL, calls)


class PlanAgent:
    def __init__(self, client: ChatClient, params: GenerationParams | None = None):
        self.client = client
        self.params = params or GenerationParams()

    def _generate(self, question: str, prompt: str, template_id: str, kind: str, round: int) -> PlanAttempt:
        system = ChatMessage("system", T.render(T.PLAN_SYSTEM))
        user = prompt
        tag = PromptTag(template_id, question)
        calls = 0
        for retry in range(SYNTAX_RETRIES + 1):
            try:
                raw = self.client.chat([system, ChatMessage("user", user)], self.params, tag)
            except ToolFailure as exc:
                raise ToolFailure(str(exc), calls) from exc
            calls += 1
            source = strip_code_fences(raw)
            try:
                program = parse_program(source)
            except PlanSyntaxError as exc:
                diagnostic = exc.diagnostic
                if retry == SYNTAX_RETRIES:
                    raise PlanFailure(diagnostic, source, calls, round) from None
                # The repair text is appended to the original request.
                user = prompt + "\n\n" + T.render(
                    T.PLAN_SYNTAX_REPAIR, error_detail=diagnostic.render(), failed_code=source
                )
                tag = PromptTag(T.PLAN_SYNTAX_REPAIR, question)
                continue
            attempt_kind = kind if retry == 0 or kind == RUNTIME_REPAIR else SYNTAX_RETRY
            return PlanAttempt(program.source, attempt_kind, round, program, calls, retry)
        raise AssertionError("unreachable")

    def plan(self, question: str, subs: SubQueryList, round: int = 0) -> PlanAttempt:
        if not question.strip():
            raise PreconditionError("plan() needs a non-empty question")
        prompt = T.render(
            T.PLAN_USER, original_query=question, sub_queries=subs.render(), CODE_EXAMPLE=T.code_example()
        )
        return self._generate(question, prompt, T.PLAN_USER, INITIAL, round)

    def repair_plan(
        self, question: str, subs: SubQueryList, failed: PlanAttempt | str, error: StructuredError, round: int
    ) -> PlanAttempt:
        if error.kind == SYNTAX_ERROR:
            raise PreconditionError("repair_plan() takes runtime errors; syntax errors are retried inside plan()")
        if not 1 <= round <= MAX_FIX_ROUNDS:
            raise PreconditionError(f"repair round must lie in 1..{MAX_FIX_ROUNDS}, got {round}")
        failed_code = failed.source if isinstance(failed, PlanAttempt) else failed
        prompt = T.render(
            T.PLAN_RUNTIME_REPAIR, original_query=question, failed_code=failed_code, error_msg=error.render()
        )
        return self._generate(question, prompt, T.PLAN_RUNTIME_REPAIR, RUNTIME_REPAIR, round)


class AnswerAgent:
    """Callable ``(query, docs) -> (answer, chat calls)`` used by the tool host."""

    def __init__(self, client: ChatClient, params: GenerationParams | None = None):
        self.client = client
        self.params = params or GenerationParams()

    def __call__(self, query: str, docs: DocumentSet | None) -> tuple[str, int]:
        if not query.strip():
            raise PreconditionError("answer() needs a non-empty query")
        if docs is not None and len(docs) == 0:
            return EMPTY_EVIDENCE_ANSWER, 0
        if docs is not None:
            template_id = T.ANSWER_EVIDENCE
            user = T.render(T.ANSWER_EVIDENCE_USER, query=query, documents=format_docs(docs))
        else:
            template_id = T.ANSWER_AGGREGATION
            user = T.render(T.ANSWER_AGGREGATION_USER, query=query)
        messages = [ChatMessage("system", T.render(template_id)), ChatMessage("user", user)]
        tag = PromptTag(template_id, query)
        for attempt in range(1, ANSWER_ATTEMPTS + 1):
            try:
                raw = self.client.chat(messages, self.params, tag)
            except ToolFailure as exc:
                raise ToolFailure(str(exc), attempt - 1) from exc
            try:
                span = extract_answer_span(raw)
            except ExtractionError:
                span = ""
            if span:
                return span, attempt
            messages = messages + [
                ChatMessage("assistant", raw),
                ChatMessage("user", T.render(T.ANSWER_FORMAT_REMINDER)),
            ]
        return EMPTY_EVIDENCE_ANSWER, ANSWER_ATTEMPTS
