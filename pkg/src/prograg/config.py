"""Layered settings: command-line flag, then config file, then default."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import yaml

from .agents import AgentParams
from .interpreter.core import ExecutionLimits
from .llm.client import GenerationParams
from .pipeline import PipelineConfig
from .tools import DEFAULT_SENTINELS, RetrievalBudget, SentinelPolicy

DEFAULTS: dict[str, Any] = {
    "endpoints.chat": None,
    "endpoints.decompose": None,
    "endpoints.plan": None,
    "endpoints.answer": None,
    "endpoints.retrieval": None,
    "models.decompose": "default",
    "models.plan": "default",
    "models.answer": "default",
    "llm.temperature": 0.0,
    "llm.max_tokens": 2048,
    "llm.timeout_s": 120.0,
    "retrieval.backend": "local",
    "retrieval.corpus": None,
    "retrieval.k0": 5,
    "retrieval.k1": 10,
    "pipeline.max_repairs": 3,
    "pipeline.merge_decompose_plan": False,
    "pipeline.max_tool_calls": 50,
    "pipeline.max_statements": 10000,
    "pipeline.wall_clock_s": 300.0,
    "pipeline.topk_policy": "host",
    "sentinels": sorted(DEFAULT_SENTINELS),
    "eval.workers": 1,
    "eval.output_dir": "runs/eval",
    "trace.path": "runs/trace.jsonl",
}

_TYPES: dict[str, tuple[type, ...]] = {
    key: (type(value),) if value is not None else (str,) for key, value in DEFAULTS.items()
}
for _key in ("llm.temperature", "llm.timeout_s", "pipeline.wall_clock_s"):
    _TYPES[_key] = (int, float)


class ConfigError(ValueError):
    pass


def flatten(data: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for name, value in data.items():
        key = f"{prefix}{name}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, key + "."))
        else:
            flat[key] = value
    return flat


def _check(key: str, value: Any, origin: str) -> Any:
    if key not in DEFAULTS:
        raise ConfigError(f"{origin}: unknown setting {key!r}")
    if value is None:
        return None
    expected = _TYPES[key]
    if isinstance(value, bool) and bool not in expected:
        raise ConfigError(f"{origin}: {key} must be {expected[0].__name__}, got a boolean")
    if not isinstance(value, expected):
        raise ConfigError(f"{origin}: {key} must be {expected[0].__name__}, got {type(value).__name__}")
    if key == "sentinels" and not all(isinstance(p, str) for p in value):
        raise ConfigError(f"{origin}: sentinels must be a list of strings")
    return value


def load_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return {key: _check(key, value, str(path)) for key, value in flatten(data).items()}


def resolve(file_values: Mapping[str, Any] | None = None, flags: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Merge layers; a flag given as None means "not passed"."""
    settings = dict(DEFAULTS)
    for key, value in (file_values or {}).items():
        settings[key] = _check(key, value, "config")
    for key, value in (flags or {}).items():
        if value is not None:
            settings[key] = _check(key, value, "flag")
    return settings


def chat_endpoint(settings: Mapping[str, Any], agent: str) -> str | None:
    return settings[f"endpoints.{agent}"] or settings["endpoints.chat"]


def pipeline_config(settings: Mapping[str, Any]) -> PipelineConfig:
    def params(agent: str) -> GenerationParams:
        return GenerationParams(
            settings[f"models.{agent}"],
            float(settings["llm.temperature"]),
            settings["llm.max_tokens"],
            float(settings["llm.timeout_s"]),
        )

    try:
        return PipelineConfig(
            budget=RetrievalBudget(settings["retrieval.k0"], settings["retrieval.k1"]),
            sentinel=SentinelPolicy(frozenset(settings["sentinels"])),
            max_repair_rounds=settings["pipeline.max_repairs"],
            limits=ExecutionLimits(
                max_tool_calls=settings["pipeline.max_tool_calls"],
                max_statements=settings["pipeline.max_statements"],
                wall_clock_s=float(settings["pipeline.wall_clock_s"]),
            ),
            merge_decompose_plan=settings["pipeline.merge_decompose_plan"],
            models=AgentParams(params("decompose"), params("plan"), params("answer")),
            topk_policy=settings["pipeline.topk_policy"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
