from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import corpus_index, run_case
from prograg.dsl import parse_program
from prograg.interpreter import ERROR_KINDS, ExecutionLimits, ExecutionTrace, StructuredError, TraceFormatError, execute
from prograg.interpreter import trace as TR
from prograg.interpreter.trace import REQUIRED_FIELDS
from prograg.interpreter.values import DocumentSet, RetrievedDoc
from prograg.tools import RetrievalBudget, ToolHost


class EchoRetriever:
    def __init__(self):
        self.queries: list[tuple[str, int]] = []

    def search(self, query: str, k: int) -> DocumentSet:
        self.queries.append((query, k))
        docs = [RetrievedDoc(f"d{i}", "t", f"{query} #{i}", 1.0 / (i + 1)) for i in range(k)]
        return DocumentSet(docs, query, k)


def scripted(replies: dict[str, str] | None = None, default: str = "yes"):
    calls: list[tuple[str, int | None]] = []

    def answerer(query, docs):
        calls.append((query, None if docs is None else docs.k))
        return (replies or {}).get(query, default), 1

    answerer.calls = calls
    return answerer


def host(answerer=None, retriever=None, **kwargs) -> ToolHost:
    return ToolHost(retriever or EchoRetriever(), answerer or scripted(), **kwargs)


def run(source: str, tools=None, **limits):
    return execute(parse_program(source), tools, ExecutionLimits(**limits) if limits else None)


# -- semantics -------------------------------------------------------------------


@pytest.mark.parametrize(
    "source, expected",
    [
        ("final_answer = 7 // 2", "3"),
        ("final_answer = -7 // 2", "-4"),
        ("final_answer = -7 % 3", "2"),
        ('final_answer = "a" + "b" * 0 if False else "ab"', "ab"),
        ('final_answer = "Yes".lower() == "yes"', "True"),
        ("final_answer = [1, 2] + [3]", "[1, 2, 3]"),
        ('final_answer = {"a": 1, "b": 2}', "{'a': 1, 'b': 2}"),
        ("final_answer = None", "None"),
        ('final = "x"', "x"),
        ('final = "x"\nfinal_answer = "y"', "y"),
        ('final_answer = f"{1 + 1} items"', "2 items"),
        ('final_answer = len("héllo")', "5"),
        ("final_answer = 0 or 5", "5"),
        ("final_answer = 3 and 0", "0"),
        ('final_answer = "b" in ["a", "b"]', "True"),
        ('final_answer = [k for k in {"b": 1, "a": 2}.keys()]', "['b', 'a']"),
        ('x = [c for c in "abc"]\nfinal_answer = x', "['a', 'b', 'c']"),
        ('final_answer = {k: v for k, v in {"a": 1}.items() if v > 0}', "{'a': 1}"),
    ],
)
def test_pure_semantics(source, expected):
    outcome = run(source)
    assert outcome.error is None, outcome.error
    assert outcome.final_answer == expected


def test_string_iteration_yields_characters():
    outcome = run('out = []\nfor ch in "ab":\n    out = out + [ch]\nfinal_answer = out')
    assert outcome.final_answer == "['a', 'b']"


def test_functions_and_recursion_limit():
    outcome = run("def twice(n):\n    return n * 2\nfinal_answer = twice(21)")
    assert outcome.final_answer == "42"
    outcome = run("def f(n):\n    return f(n + 1)\nfinal_answer = f(0)")
    assert outcome.error.kind == "BudgetExceeded"


def test_re_search_group():
    outcome = run('import re\nm = re.search("\\\\d+", "abc 1984 x")\nfinal_answer = m.group()')
    assert outcome.error is None, outcome.error
    assert outcome.final_answer == "1984"


def test_empty_program_has_no_final_answer():
    outcome = run("")
    assert outcome.error is None and outcome.final_answer is None and len(outcome.trace) == 0


def test_documentset_behaves_like_text_list():
    retriever = EchoRetriever()
    outcome = run('d = retrieve("q")\nfinal_answer = [len(d), d[0]]', host(retriever=retriever))
    assert outcome.final_answer == "[5, 'q #0']"


# -- errors ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "source, kind, line",
    [
        ("x = 1 // 0", "ZeroDivision", 1),
        ('x = {}["a"]', "KeyError", 1),
        ("x = [][0]", "IndexError", 1),
        ("x = y", "NameError", 1),
        ('x = 1\ny = x + "a"', "TypeError", 2),
        ('x = int("z")', "ValueError", 1),
        ("x = [1] * 3", "UnsupportedConstruct", 1),
        ("def f():\n    return 1 // 0\nx = f()", "ZeroDivision", 2),
    ],
)
def test_runtime_error_kinds(source, kind, line):
    outcome = run(source)
    assert outcome.error.kind == kind
    assert outcome.error.span.line == line
    entry = outcome.trace[len(outcome.trace) - 1]
    assert entry.kind == TR.ERROR and entry.output["kind"] == kind


def test_traceback_names_function_frames():
    outcome = run("def f():\n    return 1 // 0\nx = f()")
    text = outcome.error.render()
    assert 'line 3, in <module>' in text and "line 2, in f" in text
    assert text.endswith("ZeroDivisionError: integer division or modulo by zero")


def test_missing_tool_host_is_a_tool_failure():
    outcome = run('d = retrieve("q")')
    assert outcome.error.kind == "ToolFailure"


def test_retrieve_argument_errors():
    assert run('d = retrieve("")', host()).error.kind == "ValueError"
    assert run("d = retrieve(1)", host()).error.kind == "TypeError"
    assert run('d = retrieve("q", bogus=1)', host()).error.kind == "TypeError"
    assert run('x = answer("q", "not docs")', host()).error.kind == "TypeError"


def test_structured_error_validates_kind():
    with pytest.raises(ValueError):
        StructuredError("Whatever", "x")
    assert "ZeroDivision" in ERROR_KINDS and "Timeout" in ERROR_KINDS


def test_error_round_trips_through_dict():
    error = run("x = y").error
    assert StructuredError.from_dict(error.to_dict()).to_dict() == error.to_dict()


# -- budgets -------------------------------------------------------------------------

LOOP = 'for i in range({n}):\n    d = retrieve("q")\nfinal_answer = "done"'


def test_tool_budget_message_names_loop():
    outcome = run(LOOP.format(n=100), host(), max_tool_calls=3)
    assert outcome.error.kind == "BudgetExceeded"
    assert "retrieve() call number 4" in outcome.error.message
    assert "loop at line 1: for i in range(100):" in outcome.error.message


def test_statement_budget():
    outcome = run("for i in range(100000):\n    x = i", max_statements=50)
    assert outcome.error.kind == "BudgetExceeded"
    assert "statement budget of 50" in outcome.error.message


def test_wall_clock_budget():
    outcome = run("for i in range(10000000):\n    x = i", wall_clock_s=0.05, max_statements=10**9)
    assert outcome.error.kind == "Timeout"


def test_limits_validate():
    with pytest.raises(ValueError):
        ExecutionLimits(max_tool_calls=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(0, 20), st.integers(0, 10))
def test_tool_budget_is_monotone(n, limit, extra):
    source = LOOP.format(n=n)
    small = run(source, host(), max_tool_calls=limit or 1)
    large = run(source, host(), max_tool_calls=(limit or 1) + extra)
    assert small.ok == (n <= (limit or 1))
    if small.ok:
        assert large.ok and large.final_answer == small.final_answer


# -- tools and boosting ------------------------------------------------------------------


def test_host_policy_overrides_program_topk():
    retriever = EchoRetriever()
    run('d = retrieve("q", topk=10)', host(retriever=retriever))
    assert retriever.queries == [("q", 5)]


def test_program_policy_honours_topk():
    retriever = EchoRetriever()
    run('d = retrieve("q", topk=7)', host(retriever=retriever, topk_policy="program"))
    assert retriever.queries == [("q", 7)]


def test_sentinel_answer_triggers_one_boost():
    answerer = scripted(default="unknown")
    retriever = EchoRetriever()
    outcome = run('d = retrieve("q")\nfinal_answer = answer("who?", d)', host(answerer, retriever))
    assert retriever.queries == [("q", 5), ("q", 10)]
    assert answerer.calls == [("who?", 5), ("who?", 10)]
    boosts = outcome.trace.of_kind(TR.ADAPTIVE_RERETRIEVE)
    assert len(boosts) == 1 and boosts[0].k == 10 and boosts[0].inputs["previous_k"] == 5


def test_aggregation_answer_is_never_boosted():
    answerer = scripted(default="unknown")
    outcome = run('final_answer = answer("who?")', host(answerer))
    assert answerer.calls == [("who?", None)]
    assert outcome.trace.of_kind(TR.ADAPTIVE_RERETRIEVE) == []


def test_f1_second_hop_queries_the_drifted_entity():
    result = run_case("f1")
    queries = [e.inputs["query"] for e in result.trace.of_kind(TR.TOOL_RETRIEVE)]
    assert queries[1] == "What other devices can control iTunes?"
    assert result.predicted == "iPod Touch, iPad"


# -- trace -------------------------------------------------------------------------------


def test_trace_entries_have_required_fields():
    outcome = run('d = retrieve("q")\nfinal_answer = answer("q", d)', host())
    rows = [json.loads(line) for line in outcome.trace.to_jsonl().splitlines()]
    assert [r["step"] for r in rows] == list(range(1, len(rows) + 1))
    for row in rows:
        assert set(REQUIRED_FIELDS) <= set(row)
        assert row["kind"] in TR.ENTRY_KINDS
    kinds = [r["kind"] for r in rows]
    assert kinds == ["tool-retrieve", "assign", "tool-answer", "assign"]
    assert rows[0]["k"] == 5 and len(rows[0]["output"]) == 5
    assert rows[2]["inputs"]["docs"] == ["d0", "d1", "d2", "d3", "d4"]


def test_trace_file_round_trip(tmp_path):
    outcome = run('d = retrieve("q")\nx = y', host())
    path = tmp_path / "t.jsonl"
    outcome.trace.write(path)
    again = ExecutionTrace.read(path)
    assert [e.to_dict() for e in again] == [e.to_dict() for e in outcome.trace]


def test_trace_reader_reports_bad_lines(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"step": 1}\n', encoding="utf-8")
    with pytest.raises(TraceFormatError) as info:
        ExecutionTrace.read(path)
    assert "line 1" in str(info.value)


def test_execution_is_deterministic_without_timing():
    source = 'd = retrieve("q")\nfor t in d:\n    x = answer(t, d)\nfinal_answer = x'
    first = run(source, host()).trace.to_jsonl(timing=False)
    second = run(source, host()).trace.to_jsonl(timing=False)
    assert first == second


def test_real_index_case_a_program():
    from conftest import program_source

    answers = {"Which group sang 2014 S/S?": "WINNER"}
    outcome = execute(
        parse_program(program_source("case_a")),
        ToolHost(corpus_index(), scripted(answers, default="YG Entertainment"), RetrievalBudget()),
    )
    assert outcome.ok, outcome.error
    first = outcome.trace.of_kind(TR.TOOL_RETRIEVE)[0]
    assert first.output[0]["doc_id"] == "a-2014ss"
