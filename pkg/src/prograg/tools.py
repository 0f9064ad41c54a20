"""The two tool primitives exposed to plans, plus sentinel-driven boosting."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .errors import PreconditionError, ToolFailure
from .interpreter.values import DocumentSet

DEFAULT_SENTINELS = frozenset({"unknown", "cannot answer", "not enough information", "no information"})

# Who decides k when a plan passes retrieve(..., topk=N).
TOPK_HOST = "host"
TOPK_PROGRAM = "program"

EVIDENCE = "evidence"
AGGREGATION = "aggregation"

MAX_K = 100


@dataclass(frozen=True)
class SentinelPolicy:
    phrases: frozenset[str] = DEFAULT_SENTINELS

    def __post_init__(self) -> None:
        cleaned = frozenset(p.strip().lower() for p in self.phrases if p.strip())
        if not cleaned:
            raise ValueError("sentinel policy needs at least one phrase")
        object.__setattr__(self, "phrases", cleaned)

    def matches(self, answer: str) -> bool:
        text = answer.strip().lower()
        return bool(text) and any(phrase in text for phrase in self.phrases)


DEFAULT_POLICY = SentinelPolicy()


def is_sentinel(answer: str, policy: SentinelPolicy = DEFAULT_POLICY) -> bool:
    """True iff the trimmed, lowercased answer contains a sentinel phrase."""
    return policy.matches(answer)


@dataclass(frozen=True)
class RetrievalBudget:
    default_k: int = 5
    boosted_k: int = 10

    def __post_init__(self) -> None:
        if not 1 <= self.default_k <= MAX_K or not 1 <= self.boosted_k <= MAX_K:
            raise ValueError(f"k values must lie in 1..{MAX_K}")
        if self.boosted_k <= self.default_k:
            raise ValueError(f"boosted k ({self.boosted_k}) must exceed default k ({self.default_k})")


def format_docs(docs: DocumentSet) -> str:
    """``[Doc i]`` blocks in rank order, separated by one blank line."""
    if len(docs) == 0:
        raise PreconditionError("format_docs needs at least one document")
    return "\n\n".join(f"[Doc {i}]\n{doc.text}" for i, doc in enumerate(docs.docs, 1))


class Retriever(Protocol):
    def search(self, query: str, k: int) -> DocumentSet: ...


# (query, docs-or-None) -> (answer text, chat calls spent)
Answerer = Callable[[str, "DocumentSet | None"], "tuple[str, int]"]


@dataclass(frozen=True)
class BoostRecord:
    docs: DocumentSet
    answer: str
    chat_calls: int
    ms: float = 0.0


@dataclass(frozen=True)
class AnswerOutcome:
    answer: str
    first_answer: str
    mode: str
    chat_calls: int
    boost: BoostRecord | None = None


EMPTY_EVIDENCE_ANSWER = "unknown"


@dataclass
class ToolHost:
    """Stateless tool host; safe to share between concurrent executions."""

    retriever: Retriever
    answerer: Answerer
    budget: RetrievalBudget = field(default_factory=RetrievalBudget)
    sentinel: SentinelPolicy = DEFAULT_POLICY
    topk_policy: str = TOPK_HOST

    def __post_init__(self) -> None:
        if self.topk_policy not in (TOPK_HOST, TOPK_PROGRAM):
            raise ValueError(f"unknown topk policy {self.topk_policy!r}")

    def resolve_k(self, requested: int | None) -> int:
        if self.topk_policy == TOPK_PROGRAM and requested is not None:
            return requested
        return self.budget.default_k

    def retrieve(self, query: str, k: int) -> DocumentSet:
        if not query.strip():
            raise PreconditionError("retrieve() query must be non-empty")
        if not 1 <= k <= MAX_K:
            raise PreconditionError(f"retrieve() k must lie in 1..{MAX_K}, got {k}")
        try:
            docs = self.retriever.search(query, k)
        except ToolFailure:
            raise
        except Exception as exc:
            raise ToolFailure(f"retrieval backend error: {type(exc).__name__}: {exc}") from exc
        return DocumentSet(docs.docs[:k], query, k)

    def _ask(self, query: str, docs: DocumentSet | None) -> tuple[str, int]:
        if docs is not None and len(docs) == 0:
            return EMPTY_EVIDENCE_ANSWER, 0
        return self.answerer(query, docs)

    def answer(self, query: str, docs: DocumentSet | None) -> AnswerOutcome:
        if not query.strip():
            raise PreconditionError("answer() query must be non-empty")
        mode = EVIDENCE if docs is not None else AGGREGATION
        first, calls = self._ask(query, docs)
        if docs is None or not self.sentinel.matches(first) or docs.k >= self.budget.boosted_k:
            return AnswerOutcome(first, first, mode, calls)
        started = time.monotonic()
        try:
            wider = self.retrieve(docs.query, self.budget.boosted_k)
            second, boost_calls = self._ask(query, wider)
        except ToolFailure as exc:
            raise ToolFailure(str(exc), calls + exc.chat_calls) from exc
        ms = round((time.monotonic() - started) * 1000.0, 3)
        return AnswerOutcome(second, first, mode, calls, BoostRecord(wider, second, boost_calls, ms))
