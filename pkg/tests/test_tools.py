from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from prograg.errors import PreconditionError, ToolFailure
from prograg.interpreter.values import DocumentSet, RetrievedDoc
from prograg.tools import (
    DEFAULT_SENTINELS,
    EMPTY_EVIDENCE_ANSWER,
    RetrievalBudget,
    SentinelPolicy,
    ToolHost,
    format_docs,
    is_sentinel,
)


def docset(n: int, query: str = "q", k: int | None = None) -> DocumentSet:
    return DocumentSet([RetrievedDoc(f"d{i}", "", f"text {i}", 1.0) for i in range(n)], query, k or max(n, 1))


class Fixed:
    def __init__(self, n=None, fail=False):
        self.n, self.fail, self.calls = n, fail, []

    def search(self, query, k):
        self.calls.append(k)
        if self.fail:
            raise RuntimeError("disk on fire")
        return docset(k if self.n is None else self.n, query, k)


@pytest.mark.parametrize(
    "answer, expected",
    [
        ("unknown", True),
        ("  Unknown. ", True),
        ("It is not enough information", True),
        ("Cannot answer", True),
        ("There is no information about it", True),
        ("YG Entertainment", False),
        ("", False),
        ("know", False),
    ],
)
def test_sentinel_detection(answer, expected):
    assert is_sentinel(answer) is expected


def test_custom_sentinel_policy():
    policy = SentinelPolicy(frozenset({"  N/A "}))
    assert policy.matches("n/a") and not policy.matches("unknown")
    with pytest.raises(ValueError):
        SentinelPolicy(frozenset({" "}))


@given(st.text(max_size=30))
def test_sentinel_ignores_surrounding_whitespace(text):
    assert is_sentinel(f"  {text}\n") == is_sentinel(text)


def test_default_sentinels():
    assert DEFAULT_SENTINELS == {"unknown", "cannot answer", "not enough information", "no information"}


def test_format_docs():
    assert format_docs(docset(2)) == "[Doc 1]\ntext 0\n\n[Doc 2]\ntext 1"
    with pytest.raises(PreconditionError):
        format_docs(docset(0))


def test_budget_validation():
    RetrievalBudget(5, 10)
    for bad in ((5, 5), (0, 10), (5, 101)):
        with pytest.raises(ValueError):
            RetrievalBudget(*bad)


def test_retrieve_truncates_and_validates():
    tools = ToolHost(Fixed(n=20), lambda q, d: ("x", 1))
    assert len(tools.retrieve("q", 5)) == 5
    with pytest.raises(PreconditionError):
        tools.retrieve("  ", 5)
    with pytest.raises(PreconditionError):
        tools.retrieve("q", 0)


def test_backend_errors_become_tool_failures():
    tools = ToolHost(Fixed(fail=True), lambda q, d: ("x", 1))
    with pytest.raises(ToolFailure, match="disk on fire"):
        tools.retrieve("q", 5)


def test_empty_evidence_skips_the_model():
    calls = []
    tools = ToolHost(Fixed(n=0), lambda q, d: calls.append(q) or ("x", 1))
    outcome = tools.answer("q", docset(0, k=5))
    assert outcome.answer == EMPTY_EVIDENCE_ANSWER and calls == []


def test_boost_happens_once_at_boosted_k():
    retriever = Fixed()
    replies = iter(["unknown", "unknown"])
    tools = ToolHost(retriever, lambda q, d: (next(replies), 1))
    outcome = tools.answer("who?", docset(5))
    assert retriever.calls == [10]
    assert outcome.answer == "unknown" and outcome.first_answer == "unknown"
    assert outcome.boost.docs.k == 10 and outcome.chat_calls == 1 and outcome.boost.chat_calls == 1


def test_no_boost_when_already_at_boosted_k():
    retriever = Fixed()
    tools = ToolHost(retriever, lambda q, d: ("unknown", 1))
    assert tools.answer("who?", docset(10)).boost is None and retriever.calls == []


def test_boost_failure_keeps_the_completed_call_count():
    def answerer(query, docs):
        if docs.k == 10:
            raise ToolFailure("endpoint down", chat_calls=1)
        return "unknown", 1

    tools = ToolHost(Fixed(), answerer)
    with pytest.raises(ToolFailure) as info:
        tools.answer("who?", docset(5))
    assert info.value.chat_calls == 2


def test_topk_policy():
    tools = ToolHost(Fixed(), lambda q, d: ("x", 1))
    assert tools.resolve_k(10) == 5 and tools.resolve_k(None) == 5
    tools = ToolHost(Fixed(), lambda q, d: ("x", 1), topk_policy="program")
    assert tools.resolve_k(10) == 10 and tools.resolve_k(None) == 5
    with pytest.raises(ValueError):
        ToolHost(Fixed(), lambda q, d: ("x", 1), topk_policy="model")
