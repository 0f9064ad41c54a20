from __future__ import annotations

import json
import logging

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from prograg.errors import PreconditionError, ToolFailure
from prograg.llm import (
    TEMPLATE_IDS,
    ChatMessage,
    ExtractionError,
    GenerationParams,
    HttpChatClient,
    ParseError,
    PromptTag,
    PromptTemplate,
    ReplayChatClient,
    ReplayMiss,
    TemplateError,
    extract_answer_span,
    get_template,
    parse_subquery_json,
    read_script,
    render,
)
from prograg.llm.replay import ReplayScriptError
from prograg.llm.templates import PLACEHOLDERS, code_example, format_sub_queries

GOLDEN = FIXTURES / "golden"
INPUTS = json.loads((GOLDEN / "inputs.json").read_text(encoding="utf-8"))

SYSTEM = ChatMessage("system", "sys")
USER = ChatMessage("user", "hi")
PARAMS = GenerationParams()


# -- templates ----------------------------------------------------------------


@pytest.mark.parametrize("template_id", TEMPLATE_IDS)
def test_templates_render_byte_equal_to_golden(template_id):
    values = {k: (code_example() if v is None else v) for k, v in INPUTS.get(template_id, {}).items()}
    expected = (GOLDEN / f"{template_id}.txt").read_text(encoding="utf-8")
    assert render(template_id, **values) == expected


@pytest.mark.parametrize("template_id", sorted(PLACEHOLDERS))
def test_every_template_loads_and_declares_its_placeholders(template_id):
    template = get_template(template_id)
    for name in template.placeholders:
        assert "{" + name + "}" in template.body


def test_render_rejects_unknown_and_missing_values():
    with pytest.raises(TemplateError, match="no placeholder"):
        render("decompose-user", query="q", extra="x")
    with pytest.raises(TemplateError, match="missing"):
        render("plan-runtime-repair", original_query="q", failed_code="c")
    with pytest.raises(TemplateError, match="unknown template"):
        get_template("nope")


def test_declared_placeholder_must_appear():
    with pytest.raises(TemplateError):
        PromptTemplate("t", "no slots here", ("query",))


def test_literal_braces_pass_through():
    body = get_template("plan-system").body + get_template("code-example").body
    assert "{" in body
    template = PromptTemplate("t", "Q: {query} and f\"{group}\"", ("query",))
    assert template.render(query="x") == 'Q: x and f"{group}"'


@given(st.text(max_size=40))
def test_substituted_text_is_not_rescanned(value):
    template = PromptTemplate("t", "{a}|{b}", ("a", "b"))
    assert template.render(a=value, b="{a}") == f"{value}|{{a}}"


def test_format_sub_queries():
    assert format_sub_queries(["a?", "b?"]) == "1. a?\n2. b?"


# -- extraction -----------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("<answer>WINNER</answer>", "WINNER"),
        ("Reasoning...\n<ANSWER>\n  YG Entertainment \n</Answer> trailing", "YG Entertainment"),
        ("<answer>first</answer><answer>second</answer>", "first"),
        ("<answer></answer>", ""),
    ],
)
def test_extract_answer_span(raw, expected):
    assert extract_answer_span(raw) == expected


@pytest.mark.parametrize("raw", ["WINNER", "<answer>unterminated", "</answer>x<answer>"])
def test_extract_answer_failures(raw):
    with pytest.raises(ExtractionError):
        extract_answer_span(raw)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ('["a?", "b?"]', ["a?", "b?"]),
        ('Sure:\n```json\n[" a? ", "b?"]\n```', ["a?", "b?"]),
    ],
)
def test_parse_subquery_json(raw, expected):
    assert parse_subquery_json(raw) == expected


@pytest.mark.parametrize("raw", ["no list", "[]", '["a", 3]', '["a", "  "]', "[not json]", "] before ["])
def test_parse_subquery_json_failures(raw):
    with pytest.raises(ParseError):
        parse_subquery_json(raw)


# -- messages and params ----------------------------------------------------------


def test_message_and_param_validation():
    with pytest.raises(ValueError):
        ChatMessage("tool", "x")
    with pytest.raises(ValueError):
        ChatMessage("user", "  ")
    ChatMessage("assistant", "")
    for bad in ({"temperature": -1}, {"max_tokens": 0}, {"timeout_s": 0}):
        with pytest.raises(ValueError):
            GenerationParams(**bad)


def test_fingerprint_truncates_key():
    assert PromptTag("plan-user", "x" * 100).fingerprint == "plan-user:" + "x" * 64


# -- replay ------------------------------------------------------------------------


def test_replay_queue_is_sticky():
    client = ReplayChatClient.from_pairs([("t:a", "one"), ("t:a", "two")])
    tag = PromptTag("t", "a")
    assert [client.chat([SYSTEM, USER], PARAMS, tag) for _ in range(3)] == ["one", "two", "two"]
    assert len(client.calls) == 3


def test_replay_exact_beats_pattern_and_misses_raise():
    client = ReplayChatClient.from_pairs([("t:*", "wild"), ("t:exact", "exact")])
    assert client.chat([SYSTEM, USER], PARAMS, PromptTag("t", "exact")) == "exact"
    assert client.chat([SYSTEM, USER], PARAMS, PromptTag("t", "other")) == "wild"
    with pytest.raises(ReplayMiss) as info:
        client.chat([SYSTEM, USER], PARAMS, PromptTag("u", "x"))
    assert info.value.fingerprint == "u:x"
    assert isinstance(info.value, ToolFailure)


def test_fork_resets_cursors():
    client = ReplayChatClient.from_pairs([("t:a", "one"), ("t:a", "two")])
    tag = PromptTag("t", "a")
    client.chat([SYSTEM, USER], PARAMS, tag)
    fork = client.fork()
    assert fork.chat([SYSTEM, USER], PARAMS, tag) == "one" and fork.calls[0].response == "one"


def test_replay_checks_messages():
    client = ReplayChatClient.from_pairs([("t:a", "x")])
    with pytest.raises(PreconditionError):
        client.chat([USER], PARAMS, PromptTag("t", "a"))
    with pytest.raises(PreconditionError):
        client.chat([], PARAMS, PromptTag("t", "a"))


def test_script_errors_name_the_line(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text('{"fingerprint": "a", "response": "b"}\n{"fingerprint": 1}\n', encoding="utf-8")
    with pytest.raises(ReplayScriptError, match="line 2"):
        read_script(path)


def test_fixture_scripts_are_valid():
    for path in sorted((FIXTURES / "replay").glob("*.jsonl")):
        assert read_script(path), path


# -- http client ---------------------------------------------------------------------


def http(handler, api_key="sk-secret"):
    return HttpChatClient("http://llm.test/v1/chat/completions", api_key=api_key, transport=httpx.MockTransport(handler))


def ok(content="<answer>x</answer>"):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": content}}]})


def test_http_request_shape():
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return ok("hello")

    client = http(handler)
    params = GenerationParams(model="m1", temperature=0.2, max_tokens=64)
    assert client.chat([SYSTEM, USER], params) == "hello"
    assert seen["auth"] == "Bearer sk-secret"
    assert seen["body"] == {
        "model": "m1",
        "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "hi"}],
        "temperature": 0.2,
        "max_tokens": 64,
    }


def test_api_key_from_environment(monkeypatch):
    monkeypatch.setenv("PROGRAG_API_KEY", "sk-env")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        return ok()

    HttpChatClient("http://llm.test/c", transport=httpx.MockTransport(handler)).chat([SYSTEM, USER], PARAMS)
    assert seen["auth"] == "Bearer sk-env"


@pytest.mark.parametrize(
    "response, fragment",
    [
        (httpx.Response(500, text="boom"), "HTTP 500"),
        (httpx.Response(200, text="nope"), "invalid JSON"),
        (httpx.Response(200, json={"choices": []}), "choices[0]"),
        (httpx.Response(200, json={"choices": [{"message": {"content": None}}]}), "not text"),
    ],
)
def test_http_failures(response, fragment):
    with pytest.raises(ToolFailure) as info:
        http(lambda request: response).chat([SYSTEM, USER], PARAMS)
    assert fragment in str(info.value)


def test_http_timeout_and_transport_errors():
    def slow(request):
        raise httpx.ReadTimeout("slow", request=request)

    def refused(request):
        raise httpx.ConnectError("refused", request=request)

    with pytest.raises(ToolFailure, match="timed out"):
        http(slow).chat([SYSTEM, USER], PARAMS)
    with pytest.raises(ToolFailure, match="ConnectError"):
        http(refused).chat([SYSTEM, USER], PARAMS)


def test_api_key_never_leaks(caplog):
    client = http(lambda request: httpx.Response(401, text="bad key"))
    with caplog.at_level(logging.DEBUG, logger="prograg"):
        with pytest.raises(ToolFailure) as info:
            client.chat([SYSTEM, USER], PARAMS)
    assert "sk-secret" not in str(info.value)
    assert "sk-secret" not in repr(client)
    assert "sk-secret" not in caplog.text
