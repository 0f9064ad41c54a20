"""Execution trace: one JSON object per line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

ASSIGN = "assign"
TOOL_RETRIEVE = "tool-retrieve"
TOOL_ANSWER = "tool-answer"
CONTROL = "control"
ERROR = "error"
ADAPTIVE_RERETRIEVE = "adaptive-reretrieve"
REPAIR_ROUND_START = "repair-round-start"
LLM_DECOMPOSE = "llm-decompose"
LLM_PLAN = "llm-plan"

ENTRY_KINDS = (
    ASSIGN,
    TOOL_RETRIEVE,
    TOOL_ANSWER,
    CONTROL,
    ERROR,
    ADAPTIVE_RERETRIEVE,
    REPAIR_ROUND_START,
    LLM_DECOMPOSE,
    LLM_PLAN,
)

REQUIRED_FIELDS = ("step", "source", "line", "kind", "inputs", "output", "k", "ms", "repair_round")
TIMING_FIELDS = ("ms",)


class TraceFormatError(ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass
class TraceEntry:
    step: int
    source: str
    line: int
    kind: str
    inputs: dict[str, Any] = field(default_factory=dict)
    output: Any = None
    k: int | None = None
    ms: float = 0.0
    repair_round: int = 0
    # Chat-model invocations caused by this step; lets call totals be rebuilt from the trace.
    chat_calls: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TraceEntry:
        missing = [name for name in REQUIRED_FIELDS if name not in data]
        if missing:
            raise ValueError(f"missing fields: {', '.join(missing)}")
        if data["kind"] not in ENTRY_KINDS:
            raise ValueError(f"unknown entry kind {data['kind']!r}")
        return cls(
            step=int(data["step"]),
            source=str(data["source"]),
            line=int(data["line"]),
            kind=data["kind"],
            inputs=dict(data["inputs"] or {}),
            output=data["output"],
            k=None if data["k"] is None else int(data["k"]),
            ms=float(data["ms"]),
            repair_round=int(data["repair_round"]),
            chat_calls=int(data.get("chat_calls", 0)),
        )


class ExecutionTrace:
    """Ordered trace. Step numbers keep increasing across repair rounds."""

    def __init__(self, entries: Iterable[TraceEntry] = ()):
        self.entries: list[TraceEntry] = list(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TraceEntry]:
        return iter(self.entries)

    def __getitem__(self, index: int) -> TraceEntry:
        return self.entries[index]

    @property
    def next_step(self) -> int:
        return self.entries[-1].step + 1 if self.entries else 1

    def add(self, kind: str, source: str = "", line: int = 0, **fields: Any) -> TraceEntry:
        if kind not in ENTRY_KINDS:
            raise ValueError(f"unknown entry kind {kind!r}")
        entry = TraceEntry(step=self.next_step, source=source, line=line, kind=kind, **fields)
        self.entries.append(entry)
        return entry

    def of_kind(self, *kinds: str) -> list[TraceEntry]:
        return [e for e in self.entries if e.kind in kinds]

    def to_dicts(self, timing: bool = True) -> list[dict[str, Any]]:
        rows = [e.to_dict() for e in self.entries]
        if not timing:
            for row in rows:
                for name in TIMING_FIELDS:
                    row.pop(name, None)
        return rows

    def to_jsonl(self, timing: bool = True) -> str:
        return "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in self.to_dicts(timing))

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> ExecutionTrace:
        entries = []
        with open(path, encoding="utf-8") as handle:
            for number, raw in enumerate(handle, 1):
                if not raw.strip():
                    continue
                try:
                    data = json.loads(raw)
                    if not isinstance(data, dict):
                        raise ValueError("entry is not a JSON object")
                    entries.append(TraceEntry.from_dict(data))
                except (ValueError, TypeError) as exc:
                    raise TraceFormatError(number, str(exc)) from None
        return cls(entries)
