from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import CASES, corpus_index, run_case
from prograg.agents import DECOMPOSE_ATTEMPTS, SYNTAX_RETRIES
from prograg.errors import ToolFailure
from prograg.interpreter import trace as TR
from prograg.interpreter.core import ExecutionLimits
from prograg.pipeline import (
    ANSWERED,
    DECOMPOSE_FALLBACK_ANSWERED,
    PLAN_FAILURE,
    PROGRAM_ERROR,
    STATUSES,
    TOOL_FAILURE_STATUS,
    AccountingMismatch,
    CallStats,
    PipelineConfig,
    count_llm_calls,
    run_question,
)

QUESTION = "Which company formed the group that released 2014 S/S?"

GOOD = 'd = retrieve("2014 S/S debut")\nfinal_answer = answer("Who formed it?", d)'
RUNTIME = 'final_answer = answer("Who formed it?", missing)'
SYNTAX = "final_answer = answer("
NO_FINAL = 'd = retrieve("2014 S/S debut")'
LOOP = 'for q in ["a", "b", "c"]:\n    d = retrieve(q)\n    x = answer("Who formed it?", d)\nfinal_answer = x'
GOOD_ANSWER = "<answer>YG Entertainment</answer>"


class Scripted:
    """Chat stand-in: decompose, plan and answer replies drawn from fixed lists."""

    def __init__(self, decompose=('["a?", "b?"]',), plans=(GOOD,), answers=(GOOD_ANSWER,)):
        self.replies = {"decompose": list(decompose), "plan": list(plans), "answer": list(answers)}
        self.calls = {"decompose": 0, "plan": 0, "answer": 0}
        self.completed = 0

    def chat(self, messages, params, tag=None):
        role = tag.template_id.split("-")[0]
        pool = self.replies[role]
        reply = pool[min(self.calls[role], len(pool) - 1)]
        self.calls[role] += 1
        if isinstance(reply, Exception):
            raise reply
        self.completed += 1
        return reply


def run(client, **config):
    return run_question(QUESTION, PipelineConfig(**config), client, corpus_index())


# -- fixture cases ------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(CASES))
def test_cases_reach_expected_outcome(name):
    expected = CASES[name]["expected"]
    result = run_case(name)
    assert result.status == expected["status"]
    assert result.predicted == expected["predicted"]
    if expected["boosts"] is not None:
        assert result.stats.adaptive_boosts_used == expected["boosts"]
    count_llm_calls(result)


@pytest.mark.parametrize("name", ["case_a", "case_b", "case_c", "case_d"])
def test_merged_mode_skips_decomposition(name):
    split = run_case(name)
    merged = run_case(name, PipelineConfig(merge_decompose_plan=True))
    assert merged.predicted == split.predicted
    assert merged.sub_query_source == "merged"
    assert merged.trace.of_kind(TR.LLM_DECOMPOSE) == []
    assert merged.stats.chat_calls == split.stats.chat_calls - 1
    count_llm_calls(merged)


def test_f5_repair_round_recovers():
    result = run_case("f5_repaired")
    assert result.status == ANSWERED and result.predicted == "Nate Robinson"
    assert result.stats.repair_rounds_used == 1
    first_error = result.trace.of_kind(TR.ERROR)[0]
    assert first_error.output["kind"] == "BudgetExceeded"


def test_f5_without_repair_is_a_program_error():
    result = run_case("f5", PipelineConfig(max_repair_rounds=0))
    assert result.status == PROGRAM_ERROR and result.error.kind == "BudgetExceeded"
    assert result.stats.repair_rounds_used == 0
    assert "for name in clients:" in result.error.message


# -- loop behaviour ---------------------------------------------------------------------


def test_repair_rounds_get_a_fresh_environment():
    client = Scripted(plans=['x = "leaked"\nfinal_answer = answer("q", missing)', "final_answer = x"])
    result = run(client)
    assert result.status == PROGRAM_ERROR
    assert result.error.kind == "NameError" and "'x'" in result.error.message
    assert result.stats.repair_rounds_used == 3


def test_clean_run_without_final_is_repaired():
    result = run(Scripted(plans=[NO_FINAL, GOOD]))
    assert result.status == ANSWERED and result.stats.repair_rounds_used == 1
    start = result.trace.of_kind(TR.REPAIR_ROUND_START)[0]
    assert "final_answer" in start.inputs["error"]["message"]


def test_plan_failure_consumes_a_round_and_restarts_from_the_initial_prompt():
    client = Scripted(plans=[SYNTAX] * (SYNTAX_RETRIES + 1) + [GOOD])
    result = run(client)
    assert result.status == ANSWERED and result.stats.repair_rounds_used == 1
    plans = result.trace.of_kind(TR.LLM_PLAN)
    assert [p.inputs["kind"] for p in plans] == ["initial", "initial"]


def test_persistent_syntax_errors_end_in_plan_failure():
    result = run(Scripted(plans=[SYNTAX]), max_repair_rounds=1)
    assert result.status == PLAN_FAILURE and result.error.kind == "SyntaxError"
    assert result.stats.chat_calls == 1 + 2 * (SYNTAX_RETRIES + 1)


def test_decompose_fallback_status():
    result = run(Scripted(decompose=["no list"]))
    assert result.status == DECOMPOSE_FALLBACK_ANSWERED
    assert result.sub_queries == (QUESTION,)


def test_tool_failure_during_answer_stops_the_run():
    result = run(Scripted(answers=[ToolFailure("endpoint down")]))
    assert result.status == TOOL_FAILURE_STATUS
    assert result.stats.repair_rounds_used == 0
    count_llm_calls(result)


def test_tool_failure_during_planning_is_recorded():
    result = run(Scripted(plans=[ToolFailure("endpoint down")]))
    assert result.status == TOOL_FAILURE_STATUS and result.trace.of_kind(TR.ERROR)
    count_llm_calls(result)


def test_empty_question_is_rejected_without_raising():
    result = run_question("  ", PipelineConfig(), Scripted(), corpus_index())
    assert result.status == PROGRAM_ERROR and result.stats == CallStats()


def test_config_bounds():
    for bad in (-1, 4):
        with pytest.raises(ValueError):
            PipelineConfig(max_repair_rounds=bad)


def test_accounting_mismatch_is_detected():
    result = run_case("case_a")
    result.stats = CallStats(chat_calls=result.stats.chat_calls + 1)
    with pytest.raises(AccountingMismatch):
        count_llm_calls(result)


def test_result_row_excludes_timing_on_request():
    row = run_case("case_a").to_dict(timing=False)
    assert "elapsed_s" not in row and row["predicted"] == "YG Entertainment"


# -- properties --------------------------------------------------------------------------

PLAN_REPLIES = st.sampled_from([GOOD, RUNTIME, SYNTAX, NO_FINAL, LOOP, ToolFailure("plan endpoint down")])
ANSWER_REPLIES = st.sampled_from(
    [GOOD_ANSWER, "no tags", "<answer>unknown</answer>", "<answer></answer>", ToolFailure("answer endpoint down")]
)
DECOMPOSE_REPLIES = st.sampled_from(['["a?", "b?"]', "garbage", '["only one?"]'])


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    st.lists(DECOMPOSE_REPLIES, min_size=1, max_size=3),
    st.lists(PLAN_REPLIES, min_size=1, max_size=12),
    st.lists(ANSWER_REPLIES, min_size=1, max_size=6),
    st.integers(0, 3),
    st.booleans(),
)
def test_pipeline_is_total_bounded_and_auditable(decompose, plans, answers, rounds, merged):
    client = Scripted(decompose, plans, answers)
    limits = ExecutionLimits(max_tool_calls=12)
    result = run(client, max_repair_rounds=rounds, merge_decompose_plan=merged, limits=limits)
    assert result.status in STATUSES
    assert result.stats.repair_rounds_used <= rounds
    assert result.stats.chat_calls == client.completed
    assert count_llm_calls(result) == result.stats
    # Worst case per round: every syntax retry, then every answer re-asked and boosted.
    per_round = (SYNTAX_RETRIES + 1) + limits.max_tool_calls * 2 * 2
    assert result.stats.chat_calls <= DECOMPOSE_ATTEMPTS + (rounds + 1) * per_round
    if result.status in (ANSWERED, DECOMPOSE_FALLBACK_ANSWERED):
        assert result.predicted is not None and result.error is None
    else:
        assert result.error is not None
    steps = [e.step for e in result.trace]
    assert steps == list(range(1, len(steps) + 1))
