from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from prograg import config as C


def write(tmp_path, text):
    path = tmp_path / "c.yaml"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_build_a_pipeline_config():
    cfg = C.pipeline_config(C.resolve())
    assert cfg.budget.default_k == 5 and cfg.budget.boosted_k == 10
    assert cfg.max_repair_rounds == 3 and cfg.limits.max_tool_calls == 50
    assert not cfg.merge_decompose_plan


def test_file_sections_are_flattened(tmp_path):
    path = write(
        tmp_path,
        "endpoints:\n  chat: http://llm.test/v1\nretrieval:\n  k0: 3\n  k1: 7\nsentinels: [n/a]\nmodels:\n  plan: big\n",
    )
    settings = C.resolve(C.load_file(path))
    assert C.chat_endpoint(settings, "plan") == "http://llm.test/v1"
    cfg = C.pipeline_config(settings)
    assert (cfg.budget.default_k, cfg.budget.boosted_k) == (3, 7)
    assert cfg.sentinel.matches("N/A") and cfg.models.plan.model == "big"


def test_per_agent_endpoint_overrides_shared_one():
    settings = C.resolve({"endpoints.chat": "http://a", "endpoints.answer": "http://b"})
    assert C.chat_endpoint(settings, "answer") == "http://b"
    assert C.chat_endpoint(settings, "plan") == "http://a"


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("retrieval:\n  k0: five\n", "must be int"),
        ("retrieval:\n  depth: 3\n", "unknown setting"),
        ("pipeline:\n  max_repairs: true\n", "boolean"),
        ("- a\n- b\n", "top level"),
        ("a: [\n", "invalid YAML"),
        ("sentinels: [1, 2]\n", "list of strings"),
    ],
)
def test_bad_files(tmp_path, text, fragment):
    with pytest.raises(C.ConfigError) as info:
        C.load_file(write(tmp_path, text))
    assert fragment in str(info.value)


def test_missing_file():
    with pytest.raises(C.ConfigError, match="cannot read"):
        C.load_file("/nonexistent/c.yaml")


def test_empty_file_is_allowed(tmp_path):
    assert C.load_file(write(tmp_path, "")) == {}


def test_invalid_combination_is_a_config_error():
    with pytest.raises(C.ConfigError):
        C.pipeline_config(C.resolve({"retrieval.k0": 10, "retrieval.k1": 5}))
    with pytest.raises(C.ConfigError):
        C.pipeline_config(C.resolve(flags={"pipeline.max_repairs": 9}))


LAYER = st.one_of(st.none(), st.integers(1, 100))


@given(LAYER, LAYER)
def test_flag_beats_file_beats_default(file_value, flag_value):
    file_values = {} if file_value is None else {"retrieval.k0": file_value}
    settings = C.resolve(file_values, {"retrieval.k0": flag_value})
    expected = flag_value if flag_value is not None else file_value if file_value is not None else 5
    assert settings["retrieval.k0"] == expected
