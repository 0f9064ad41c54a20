from __future__ import annotations

import pytest

from conftest import CASES, run_case
from prograg.evaluation import categorize_failure
from prograg.evaluation.categorize import gold_in_docs, propagated_sentinel
from prograg.interpreter import trace as TR
from prograg.interpreter.errors import StructuredError
from prograg.interpreter.trace import ExecutionTrace
from prograg.pipeline import ANSWERED, PLAN_FAILURE, CallStats, QuestionResult

FAILURES = ["f1", "f2", "f3", "f4", "f5"]


@pytest.mark.parametrize("name", FAILURES + ["case_a", "case_b", "case_c", "case_d"])
def test_fixture_labels(name):
    case = CASES[name]
    category = categorize_failure(run_case(name), case["golden_answers"])
    assert category.label == case["expected"]["label"]


def test_f2_sentinel_reaches_a_later_query():
    result = run_case("f2")
    step = propagated_sentinel(result.trace)
    assert step is not None
    later = [e.inputs["query"] for e in result.trace if e.step > step and e.kind == TR.TOOL_ANSWER]
    assert any("unknown" in q.lower() for q in later)


def result_with(predicted, trace=None, status=ANSWERED, error=None):
    return QuestionResult("q", "question?", predicted, status, trace or ExecutionTrace(), CallStats(), error=error)


def retrieval_trace(text: str) -> ExecutionTrace:
    trace = ExecutionTrace()
    trace.add(TR.TOOL_RETRIEVE, inputs={"query": "q"}, output=[{"doc_id": "d", "title": "", "text": text, "score": 1.0}])
    return trace


def test_sentinel_final_is_an_unknown_program_error():
    assert categorize_failure(result_with("unknown"), ["x"]).label == "ProgramError(UnknownError)"


def test_plan_failure_uses_last_error_kind():
    error = StructuredError("SyntaxError", "never closed")
    result = result_with(None, status=PLAN_FAILURE, error=error)
    assert categorize_failure(result, ["x"]).label == "ProgramError(SyntaxError)"


def test_refusal_text():
    assert categorize_failure(result_with("None."), ["x"]).label == "FinalRefusal"


def test_low_confidence_when_gold_was_retrieved():
    trace = retrieval_trace("YG Entertainment formed the group.")
    category = categorize_failure(result_with("SM Entertainment", trace), ["YG Entertainment"])
    assert category.name == "RetrievalMissing" and category.low_confidence


def test_gold_containment_is_word_aligned():
    assert not gold_in_docs(retrieval_trace("thirty-nine 1290 items"), ["29"])
    assert gold_in_docs(retrieval_trace("aged 29."), ["29"])


@pytest.mark.parametrize("predicted", ["wrong", "", "unknown", "neither", None])
def test_every_wrong_result_gets_exactly_one_category(predicted):
    status = ANSWERED if predicted is not None else PLAN_FAILURE
    error = None if predicted is not None else StructuredError("SyntaxError", "x")
    category = categorize_failure(result_with(predicted, status=status, error=error), ["gold"])
    assert category.name in {"RetrievalMissing", "IntermediateErrorPropagation", "FinalRefusal", "ProgramError"}
