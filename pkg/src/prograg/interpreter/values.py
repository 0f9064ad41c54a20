"""Runtime values.

Plan values are ordinary Python objects (str, int, bool, None, list, dict,
``re.Match``) so that semantics and display forms match the reference
interpreter exactly. The only artifact-specific value is :class:`DocumentSet`.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from typing import Any, Iterator


@dataclass(frozen=True)
class RetrievedDoc:
    doc_id: str
    title: str
    text: str
    score: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RetrievedDoc:
        return cls(str(data["doc_id"]), str(data.get("title", "")), str(data["text"]), float(data.get("score", 0.0)))


class DocumentSet:
    """Rank-ordered retrieval result that remembers its query and k.

    Inside a plan it behaves like a read-only list of document texts.
    """

    __slots__ = ("docs", "query", "k")

    def __init__(self, docs, query: str, k: int):
        self.docs: tuple[RetrievedDoc, ...] = tuple(docs)
        self.query = query
        self.k = k

    @property
    def texts(self) -> list[str]:
        return [d.text for d in self.docs]

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[str]:
        return iter(self.texts)

    def __getitem__(self, index):
        return self.texts[index]

    def __contains__(self, item) -> bool:
        return item in self.texts

    def __eq__(self, other) -> bool:
        if not isinstance(other, DocumentSet):
            return NotImplemented
        return (self.docs, self.query, self.k) == (other.docs, other.query, other.k)

    def __hash__(self) -> int:
        return hash((self.docs, self.query, self.k))

    def __repr__(self) -> str:
        return repr(self.texts)

    __str__ = __repr__

    def to_dict(self) -> dict[str, Any]:
        return {"query": self.query, "k": self.k, "documents": [d.to_dict() for d in self.docs]}


@dataclass(frozen=True)
class FunctionValue:
    name: str
    params: tuple[str, ...]
    body: tuple

    def __repr__(self) -> str:
        return f"<function {self.name}>"


@dataclass(frozen=True)
class ModuleValue:
    name: str

    def __repr__(self) -> str:
        return f"<module '{self.name}'>"


def type_name(value: Any) -> str:
    if isinstance(value, re.Match):
        return "re.Match"
    if isinstance(value, FunctionValue):
        return "function"
    if isinstance(value, ModuleValue):
        return "module"
    return type(value).__name__


def render_value(value: Any) -> str:
    """Display form used for f-strings and final answers (``str()`` semantics)."""
    return str(value)


def summarize_value(value: Any, limit: int = 2000) -> str:
    """Compact rendering for trace entries."""
    if isinstance(value, DocumentSet):
        return f"DocumentSet(query={value.query!r}, k={value.k}, n={len(value)})"
    text = repr(value) if isinstance(value, str) else render_value(value)
    return text if len(text) <= limit else text[: limit - 3] + "..."
