"""Parsers for model replies."""

from __future__ import annotations

import json
import re

_ANSWER = re.compile(r"<answer>(.*?)</answer>", re.IGNORECASE | re.DOTALL)


class ExtractionError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, fragment: str = ""):
        super().__init__(f"{message}: {fragment[:200]!r}" if fragment else message)
        self.fragment = fragment


def extract_answer_span(raw: str) -> str:
    """Trimmed content of the first ``<answer>...</answer>`` pair."""
    match = _ANSWER.search(raw)
    if match is None:
        raise ExtractionError("reply has no <answer>...</answer> block")
    return match.group(1).strip()


def parse_subquery_json(raw: str) -> list[str]:
    """Parse a JSON list of sub-query strings, tolerating surrounding prose and fences."""
    start = raw.find("[")
    end = raw.rfind("]")
    if start < 0 or end < start:
        raise ParseError("no JSON list found", raw)
    fragment = raw[start : end + 1]
    try:
        value = json.loads(fragment)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", fragment) from None
    if not isinstance(value, list) or not value:
        raise ParseError("expected a non-empty JSON list", fragment)
    if not all(isinstance(item, str) for item in value):
        raise ParseError("every sub-query must be a string", fragment)
    cleaned = [item.strip() for item in value]
    if not all(cleaned):
        raise ParseError("sub-queries must be non-empty", fragment)
    return cleaned
