"""Question-level loop: decompose, plan, execute, repair."""

from __future__ import annotations

import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from .agents import (
    FALLBACK_ORIGINAL,
    MERGED,
    AgentParams,
    AnswerAgent,
    DecomposeAgent,
    PlanAgent,
    PlanAttempt,
    PlanFailure,
    SubQueryList,
)
from .errors import PreconditionError, ToolFailure
from .interpreter import trace as TR
from .interpreter.core import ExecutionLimits, execute
from .interpreter.errors import NAME_ERROR, TERMINAL_KINDS, TOOL_FAILURE, StructuredError
from .interpreter.trace import ExecutionTrace
from .interpreter.values import DocumentSet
from .llm.client import ChatClient, ChatMessage, GenerationParams, PromptTag
from .tools import TOPK_HOST, AnswerOutcome, Retriever, RetrievalBudget, SentinelPolicy, ToolHost, DEFAULT_POLICY

ANSWERED = "answered"
PROGRAM_ERROR = "program-error"
PLAN_FAILURE = "plan-failure"
DECOMPOSE_FALLBACK_ANSWERED = "decompose-fallback-answered"
TOOL_FAILURE_STATUS = "tool-failure"
STATUSES = (ANSWERED, PROGRAM_ERROR, PLAN_FAILURE, DECOMPOSE_FALLBACK_ANSWERED, TOOL_FAILURE_STATUS)

DEFAULT_REPAIR_ROUNDS = 3


@dataclass(frozen=True)
class PipelineConfig:
    budget: RetrievalBudget = field(default_factory=RetrievalBudget)
    sentinel: SentinelPolicy = DEFAULT_POLICY
    max_repair_rounds: int = DEFAULT_REPAIR_ROUNDS
    limits: ExecutionLimits = field(default_factory=ExecutionLimits)
    merge_decompose_plan: bool = False
    models: AgentParams = field(default_factory=AgentParams)
    topk_policy: str = TOPK_HOST

    def __post_init__(self) -> None:
        from .agents import MAX_FIX_ROUNDS

        if not 0 <= self.max_repair_rounds <= MAX_FIX_ROUNDS:
            raise ValueError(f"max repair rounds must lie in 0..{MAX_FIX_ROUNDS}, got {self.max_repair_rounds}")


@dataclass(frozen=True)
class CallStats:
    chat_calls: int = 0
    retrieve_calls: int = 0
    answer_calls: int = 0
    repair_rounds_used: int = 0
    adaptive_boosts_used: int = 0

    def to_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass
class QuestionResult:
    question_id: str
    question: str
    predicted: str | None
    status: str
    trace: ExecutionTrace
    stats: CallStats
    elapsed_s: float = 0.0
    error: StructuredError | None = None
    sub_queries: tuple[str, ...] = ()
    sub_query_source: str = ""
    program: str = ""

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status in (ANSWERED, DECOMPOSE_FALLBACK_ANSWERED) and self.predicted is None:
            raise ValueError("answered results carry a predicted answer")

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        row = {
            "id": self.question_id,
            "question": self.question,
            "predicted": self.predicted,
            "status": self.status,
            "stats": self.stats.to_dict(),
            "error": self.error.to_dict() if self.error is not None else None,
            "sub_queries": list(self.sub_queries),
            "sub_query_source": self.sub_query_source,
            "program": self.program,
        }
        if timing:
            row["elapsed_s"] = self.elapsed_s
        return row


class AccountingMismatch(AssertionError):
    pass


class _CountingClient:
    """Counts chat invocations independently of the trace."""

    def __init__(self, inner: ChatClient):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def chat(self, messages: Sequence[ChatMessage], params: GenerationParams, tag: PromptTag | None = None) -> str:
        reply = self.inner.chat(messages, params, tag)
        with self._lock:
            self.calls += 1
        return reply


class _CountingHost:
    def __init__(self, host: ToolHost):
        self.host = host
        self.retrieves = 0
        self.answers = 0
        self.boosts = 0

    def resolve_k(self, requested: int | None) -> int:
        return self.host.resolve_k(requested)

    # Only completed calls are counted, matching what the trace records.
    def retrieve(self, query: str, k: int) -> DocumentSet:
        docs = self.host.retrieve(query, k)
        self.retrieves += 1
        return docs

    def answer(self, query: str, docs: DocumentSet | None) -> AnswerOutcome:
        outcome = self.host.answer(query, docs)
        self.answers += 1
        if outcome.boost is not None:
            self.boosts += 1
        return outcome


@dataclass
class AgentClients:
    decompose: ChatClient
    plan: ChatClient
    answer: ChatClient

    @classmethod
    def shared(cls, client: ChatClient) -> AgentClients:
        return cls(client, client, client)


def _missing_final() -> StructuredError:
    return StructuredError(NAME_ERROR, "name 'final_answer' is not defined")


class Pipeline:
    def __init__(self, config: PipelineConfig, clients: ChatClient | AgentClients, retriever: Retriever):
        self.config = config
        self.clients = clients if isinstance(clients, AgentClients) else AgentClients.shared(clients)
        self.retriever = retriever

    def run_question(self, question: str, question_id: str = "q") -> QuestionResult:
        started = time.monotonic()
        config = self.config
        counters = {name: _CountingClient(getattr(self.clients, name)) for name in ("decompose", "plan", "answer")}
        decomposer = DecomposeAgent(counters["decompose"], config.models.decompose)
        planner = PlanAgent(counters["plan"], config.models.plan)
        answerer = AnswerAgent(counters["answer"], config.models.answer)
        host = _CountingHost(ToolHost(self.retriever, answerer, config.budget, config.sentinel, config.topk_policy))
        trace = ExecutionTrace()
        repairs = 0
        error: StructuredError | None = None
        status = PROGRAM_ERROR
        predicted: str | None = None
        subs: SubQueryList | None = None
        source = ""

        def finish() -> QuestionResult:
            stats = CallStats(
                chat_calls=sum(c.calls for c in counters.values()),
                retrieve_calls=host.retrieves,
                answer_calls=host.answers,
                repair_rounds_used=repairs,
                adaptive_boosts_used=host.boosts,
            )
            return QuestionResult(
                question_id,
                question,
                predicted,
                status,
                trace,
                stats,
                round(time.monotonic() - started, 3),
                error,
                subs.sub_queries if subs else (),
                subs.source if subs else "",
                source,
            )

        try:
            if not question.strip():
                raise PreconditionError("question must be non-empty")
            if config.merge_decompose_plan:
                subs = SubQueryList((question,), MERGED, 0)
            else:
                subs = decomposer.decompose(question)
                trace.add(
                    TR.LLM_DECOMPOSE,
                    inputs={"question": question},
                    output={"sub_queries": list(subs.sub_queries), "source": subs.source},
                    chat_calls=subs.chat_calls,
                )
            attempt: PlanAttempt | None = None
            failed_source = ""
            for rnd in range(config.max_repair_rounds + 1):
                if rnd > 0:
                    repairs = rnd
                    trace.add(
                        TR.REPAIR_ROUND_START,
                        inputs={"error": error.to_dict() if error else None},
                        output=None,
                        repair_round=rnd,
                    )
                try:
                    if attempt is None:
                        # Initial plan, or a fresh start after unparseable output.
                        attempt = planner.plan(question, subs, rnd)
                    else:
                        attempt = planner.repair_plan(question, subs, failed_source, error, rnd)
                except PlanFailure as failure:
                    trace.add(
                        TR.LLM_PLAN,
                        inputs={"kind": "repair" if rnd else "initial", "round": rnd},
                        output={"error": failure.diagnostic.render(), "source": failure.source},
                        repair_round=rnd,
                        chat_calls=failure.chat_calls,
                    )
                    attempt = None
                    source = failure.source
                    error = failure.structured()
                    status = PLAN_FAILURE
                    continue
                source = attempt.source
                trace.add(
                    TR.LLM_PLAN,
                    inputs={"kind": attempt.kind, "round": rnd, "syntax_retries": attempt.syntax_retries},
                    output=attempt.source,
                    repair_round=rnd,
                    chat_calls=attempt.chat_calls,
                )
                # Fresh interpreter and environment on every round.
                outcome = execute(attempt.program, host, config.limits, trace, repair_round=rnd)
                if outcome.ok and outcome.final_answer is not None:
                    error = None
                    predicted = outcome.final_answer
                    status = DECOMPOSE_FALLBACK_ANSWERED if subs.source == FALLBACK_ORIGINAL else ANSWERED
                    break
                error = outcome.error or _missing_final()
                status = PROGRAM_ERROR
                failed_source = attempt.source
                if error.kind in TERMINAL_KINDS:
                    status = TOOL_FAILURE_STATUS
                    break
        except ToolFailure as exc:
            status = TOOL_FAILURE_STATUS
            error = StructuredError(TOOL_FAILURE, str(exc))
            trace.add(
                TR.ERROR,
                inputs={},
                output={"kind": error.kind, "message": error.message},
                repair_round=repairs,
                chat_calls=exc.chat_calls,
            )
        except PreconditionError as exc:
            status = PROGRAM_ERROR
            error = StructuredError("ValueError", str(exc))
        return finish()


def run_question(
    question: str,
    config: PipelineConfig,
    clients: ChatClient | AgentClients,
    retriever: Retriever,
    question_id: str = "q",
) -> QuestionResult:
    """Never raises for model or program misbehaviour; see ``QuestionResult.status``."""
    return Pipeline(config, clients, retriever).run_question(question, question_id)


def stats_from_trace(trace: ExecutionTrace) -> CallStats:
    entries = list(trace)
    return CallStats(
        chat_calls=sum(e.chat_calls for e in entries),
        retrieve_calls=sum(1 for e in entries if e.kind == TR.TOOL_RETRIEVE),
        answer_calls=sum(1 for e in entries if e.kind == TR.TOOL_ANSWER),
        repair_rounds_used=sum(1 for e in entries if e.kind == TR.REPAIR_ROUND_START),
        adaptive_boosts_used=sum(1 for e in entries if e.kind == TR.ADAPTIVE_RERETRIEVE),
    )


def count_llm_calls(result: QuestionResult) -> CallStats:
    """Recompute call stats from the trace alone and check them against the recorded ones."""
    rebuilt = stats_from_trace(result.trace)
    if rebuilt != result.stats:
        raise AccountingMismatch(f"trace gives {rebuilt.to_dict()} but the run recorded {result.stats.to_dict()}")
    return rebuilt
