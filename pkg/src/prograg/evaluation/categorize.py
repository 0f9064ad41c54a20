"""Heuristic failure taxonomy for incorrect predictions.

Rules, applied in order:

1. correct prediction: NotAFailure
2. status program-error, plan-failure or tool-failure: ProgramError(kind of the last error)
3. a clean run whose final value is a sentinel: ProgramError(UnknownError)
4. final value is refusal text such as "neither" or "none": FinalRefusal
5. an answer step produced a sentinel that a later tool query interpolated: IntermediateErrorPropagation
6. otherwise RetrievalMissing, flagged low-confidence when some retrieved
   document does contain a gold answer
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..interpreter import trace as TR
from ..interpreter.trace import ExecutionTrace
from ..pipeline import PLAN_FAILURE, PROGRAM_ERROR, TOOL_FAILURE_STATUS, QuestionResult
from ..tools import DEFAULT_POLICY, SentinelPolicy
from .metrics import exact_match, normalize_answer

RETRIEVAL_MISSING = "RetrievalMissing"
INTERMEDIATE_ERROR_PROPAGATION = "IntermediateErrorPropagation"
FINAL_REFUSAL = "FinalRefusal"
PROGRAM_ERROR_CATEGORY = "ProgramError"
NOT_A_FAILURE = "NotAFailure"
UNKNOWN_ERROR = "UnknownError"

REFUSAL_ANSWERS = frozenset(
    {
        "neither",
        "none",
        "nobody",
        "no one",
        "no answer",
        "not applicable",
        "cannot be determined",
        "cannot determine",
        "unclear",
        "not stated",
        "not mentioned",
    }
)


@dataclass(frozen=True)
class FailureCategory:
    name: str
    kind: str | None = None
    low_confidence: bool = False

    @property
    def label(self) -> str:
        return f"{self.name}({self.kind})" if self.kind else self.name


def _effective_answers(trace: ExecutionTrace, repair_round: int) -> list[tuple[int, str]]:
    """(step, answer) per answer call in one round, with boosted answers replacing the first try."""
    answers: list[tuple[int, str]] = []
    for entry in trace:
        if entry.repair_round != repair_round:
            continue
        if entry.kind == TR.TOOL_ANSWER:
            answers.append((entry.step, str(entry.output)))
        elif entry.kind == TR.ADAPTIVE_RERETRIEVE and answers:
            answers[-1] = (answers[-1][0], str((entry.output or {}).get("answer", "")))
    return answers


def _queries_after(trace: ExecutionTrace, step: int, repair_round: int) -> list[str]:
    return [
        str(e.inputs.get("query", ""))
        for e in trace
        if e.step > step and e.repair_round == repair_round and e.kind in (TR.TOOL_RETRIEVE, TR.TOOL_ANSWER)
    ]


def propagated_sentinel(trace: ExecutionTrace, policy: SentinelPolicy = DEFAULT_POLICY) -> int | None:
    """Step of the first sentinel answer whose text reappears in a later query.

    Only the last repair round is inspected, since that run produced the prediction.
    """
    if len(trace) == 0:
        return None
    rnd = max(e.repair_round for e in trace)
    for step, answer in _effective_answers(trace, rnd):
        text = answer.strip().lower()
        if policy.matches(answer) and any(text in query.lower() for query in _queries_after(trace, step, rnd)):
            return step
    return None


def _doc_texts(trace: ExecutionTrace) -> list[str]:
    texts = []
    for entry in trace:
        if entry.kind == TR.TOOL_RETRIEVE:
            texts.extend(d.get("text", "") for d in entry.output or [])
        elif entry.kind == TR.ADAPTIVE_RERETRIEVE:
            texts.extend(d.get("text", "") for d in (entry.output or {}).get("documents", []))
    return texts


def gold_in_docs(trace: ExecutionTrace, golds: Sequence[str]) -> bool:
    """Normalized, word-aligned containment of any gold answer in any retrieved text."""
    needles = [f" {normalize_answer(g)} " for g in golds if normalize_answer(g)]
    return any(needle in f" {normalize_answer(text)} " for text in _doc_texts(trace) for needle in needles)


def categorize_failure(
    result: QuestionResult, golds: Sequence[str], policy: SentinelPolicy = DEFAULT_POLICY
) -> FailureCategory:
    if result.predicted is not None and exact_match(result.predicted, golds):
        return FailureCategory(NOT_A_FAILURE)
    if result.status in (PROGRAM_ERROR, PLAN_FAILURE, TOOL_FAILURE_STATUS):
        kind = result.error.kind if result.error is not None else UNKNOWN_ERROR
        return FailureCategory(PROGRAM_ERROR_CATEGORY, kind)
    predicted = result.predicted or ""
    if policy.matches(predicted) or not predicted.strip():
        return FailureCategory(PROGRAM_ERROR_CATEGORY, UNKNOWN_ERROR)
    if normalize_answer(predicted) in REFUSAL_ANSWERS:
        return FailureCategory(FINAL_REFUSAL)
    if propagated_sentinel(result.trace, policy) is not None:
        return FailureCategory(INTERMEDIATE_ERROR_PROPAGATION)
    return FailureCategory(RETRIEVAL_MISSING, low_confidence=gold_in_docs(result.trace, golds))
