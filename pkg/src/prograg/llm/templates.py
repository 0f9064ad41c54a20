"""Prompt templates stored as package data.

Placeholders use ``{name}`` syntax, but only the names declared for a
template are substituted: several bodies contain literal braces (f-string
examples) that must pass through untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

DECOMPOSE_SYSTEM = "decompose-system"
DECOMPOSE_USER = "decompose-user"
PLAN_SYSTEM = "plan-system"
PLAN_USER = "plan-user"
PLAN_SYNTAX_REPAIR = "plan-syntax-repair"
PLAN_RUNTIME_REPAIR = "plan-runtime-repair"
ANSWER_EVIDENCE = "answer-evidence"
ANSWER_AGGREGATION = "answer-aggregation"

TEMPLATE_IDS = (
    DECOMPOSE_SYSTEM,
    DECOMPOSE_USER,
    PLAN_SYSTEM,
    PLAN_USER,
    PLAN_SYNTAX_REPAIR,
    PLAN_RUNTIME_REPAIR,
    ANSWER_EVIDENCE,
    ANSWER_AGGREGATION,
)

# Artifact-authored text kept beside the templates.
DECOMPOSE_CORRECTION = "decompose-correction"
ANSWER_FORMAT_REMINDER = "answer-format-reminder"
ANSWER_EVIDENCE_USER = "answer-evidence-user"
ANSWER_AGGREGATION_USER = "answer-aggregation-user"
CODE_EXAMPLE = "code-example"

PLACEHOLDERS: dict[str, tuple[str, ...]] = {
    DECOMPOSE_SYSTEM: (),
    DECOMPOSE_USER: ("query",),
    PLAN_SYSTEM: (),
    PLAN_USER: ("original_query", "sub_queries", "CODE_EXAMPLE"),
    PLAN_SYNTAX_REPAIR: ("error_detail", "failed_code"),
    PLAN_RUNTIME_REPAIR: ("original_query", "failed_code", "error_msg"),
    ANSWER_EVIDENCE: (),
    ANSWER_AGGREGATION: (),
    DECOMPOSE_CORRECTION: (),
    ANSWER_FORMAT_REMINDER: (),
    ANSWER_EVIDENCE_USER: ("query", "documents"),
    ANSWER_AGGREGATION_USER: ("query",),
    CODE_EXAMPLE: (),
}


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    placeholders: tuple[str, ...]

    def __post_init__(self) -> None:
        for name in self.placeholders:
            if "{" + name + "}" not in self.body:
                raise TemplateError(f"template {self.template_id!r} lacks declared placeholder {{{name}}}")

    def render(self, **values: str) -> str:
        unknown = sorted(set(values) - set(self.placeholders))
        if unknown:
            raise TemplateError(f"template {self.template_id!r} has no placeholder(s): {', '.join(unknown)}")
        missing = [name for name in self.placeholders if name not in values]
        if missing:
            raise TemplateError(f"template {self.template_id!r} is missing value(s) for: {', '.join(missing)}")
        if not self.placeholders:
            return self.body
        pattern = re.compile(r"\{(" + "|".join(map(re.escape, self.placeholders)) + r")\}")
        # Single pass, so substituted text is never re-scanned for placeholders.
        return pattern.sub(lambda m: str(values[m.group(1)]), self.body)


@lru_cache(maxsize=None)
def get_template(template_id: str) -> PromptTemplate:
    if template_id not in PLACEHOLDERS:
        raise TemplateError(f"unknown template id {template_id!r}")
    body = resources.files("prograg.llm").joinpath("prompts", f"{template_id}.txt").read_text(encoding="utf-8")
    return PromptTemplate(template_id, body, PLACEHOLDERS[template_id])


def render(template_id: str, **values: str) -> str:
    return get_template(template_id).render(**values)


def code_example() -> str:
    return get_template(CODE_EXAMPLE).body


def format_sub_queries(sub_queries) -> str:
    return "\n".join(f"{i}. {q}" for i, q in enumerate(sub_queries, 1))
