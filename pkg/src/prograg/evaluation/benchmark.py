"""Run the pipeline over a dataset file and write results and a report."""

from __future__ import annotations

import json
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from ..llm.client import ChatClient
from ..pipeline import AgentClients, Pipeline, PipelineConfig, QuestionResult
from ..tools import Retriever
from .categorize import NOT_A_FAILURE, categorize_failure
from .metrics import exact_match, reward, token_f1

RESULTS_FILE = "results.jsonl"
REPORT_FILE = "report.json"
TRACES_DIR = "traces"
TIMING_FIELDS = ("elapsed_s",)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    question_id: str
    question: str
    golden_answers: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.golden_answers:
            raise ValueError("golden_answers must be non-empty")


@dataclass(frozen=True)
class SkippedRecord:
    line: int
    reason: str


def _record(row: Any) -> DatasetRecord:
    if not isinstance(row, dict):
        raise ValueError("expected a JSON object")
    qid, question, golds = row.get("id"), row.get("question"), row.get("golden_answers")
    if not isinstance(qid, (str, int)) or isinstance(qid, bool):
        raise ValueError("'id' must be a string")
    if not isinstance(question, str) or not question.strip():
        raise ValueError("'question' must be a non-empty string")
    if not isinstance(golds, list) or not golds or not all(isinstance(g, str) for g in golds):
        raise ValueError("'golden_answers' must be a non-empty list of strings")
    return DatasetRecord(str(qid), question, tuple(golds))


def read_dataset(path: str | Path) -> tuple[list[DatasetRecord], list[SkippedRecord]]:
    """Parse a JSONL dataset, collecting bad lines instead of failing on them."""
    records: list[DatasetRecord] = []
    skipped: list[SkippedRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for number, raw in enumerate(handle, 1):
            if not raw.strip():
                continue
            try:
                record = _record(json.loads(raw))
                if record.question_id in seen:
                    raise ValueError(f"duplicate id {record.question_id!r}")
            except json.JSONDecodeError as exc:
                skipped.append(SkippedRecord(number, f"invalid JSON ({exc.msg})"))
                continue
            except ValueError as exc:
                skipped.append(SkippedRecord(number, str(exc)))
                continue
            seen.add(record.question_id)
            records.append(record)
    return records, skipped


def score_row(result: QuestionResult, golds: tuple[str, ...]) -> dict[str, Any]:
    row = result.to_dict()
    row["golden_answers"] = list(golds)
    row["em"] = exact_match(result.predicted, golds)
    row["f1"] = token_f1(result.predicted, golds)
    row["reward"] = reward(result.predicted, golds)
    category = categorize_failure(result, golds)
    row["category"] = category.label
    row["category_low_confidence"] = category.low_confidence
    return row


def aggregate(rows: list[dict[str, Any]]) -> dict[str, Any]:
    """Report aggregates as pure functions of the per-question rows."""
    n = len(rows)

    def mean(values: Iterable[float]) -> float:
        values = list(values)
        return sum(values) / len(values) if values else 0.0

    histogram = Counter(r["category"] for r in rows if r["category"] != NOT_A_FAILURE)
    return {
        "count": n,
        "em": 100.0 * mean(r["em"] for r in rows),
        "f1": 100.0 * mean(r["f1"] for r in rows),
        "reward": mean(r["reward"] for r in rows),
        "avg_chat_calls": mean(r["stats"]["chat_calls"] for r in rows),
        "repair_rate": mean(1.0 if r["stats"]["repair_rounds_used"] > 0 else 0.0 for r in rows),
        "boost_rate": mean(1.0 if r["stats"]["adaptive_boosts_used"] > 0 else 0.0 for r in rows),
        "failure_histogram": dict(sorted(histogram.items())),
        "status_counts": dict(sorted(Counter(r["status"] for r in rows).items())),
    }


@dataclass
class BenchmarkReport:
    dataset: str
    metrics: dict[str, Any]
    skipped: list[SkippedRecord] = field(default_factory=list)
    results_path: str = ""
    elapsed_s: float = 0.0

    @property
    def em(self) -> float:
        return self.metrics["em"]

    @property
    def f1(self) -> float:
        return self.metrics["f1"]

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        data = {"dataset": self.dataset, **self.metrics}
        data["skipped"] = [{"line": s.line, "reason": s.reason} for s in self.skipped]
        data["results_path"] = self.results_path
        if timing:
            data["elapsed_s"] = self.elapsed_s
        return data

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        m = self.metrics
        lines = [
            f"dataset         {self.dataset}",
            f"questions       {m['count']}" + (f" ({len(self.skipped)} skipped)" if self.skipped else ""),
            f"EM              {m['em']:.2f}",
            f"F1              {m['f1']:.2f}",
            f"reward          {m['reward']:.4f}",
            f"avg chat calls  {m['avg_chat_calls']:.2f}",
            f"repair rate     {m['repair_rate']:.3f}",
            f"boost rate      {m['boost_rate']:.3f}",
        ]
        for name, count in m["failure_histogram"].items():
            lines.append(f"  {name:<36} {count}")
        for s in self.skipped:
            lines.append(f"skipped line {s.line}: {s.reason}")
        return "\n".join(lines)


def _fork(client: ChatClient) -> ChatClient:
    fork = getattr(client, "fork", None)
    return fork() if callable(fork) else client


def fork_clients(clients: ChatClient | AgentClients) -> AgentClients:
    """Per-question clients, so scripted replies never depend on scheduling order."""
    if not isinstance(clients, AgentClients):
        return AgentClients.shared(_fork(clients))
    forks: dict[int, ChatClient] = {}
    members = []
    for client in (clients.decompose, clients.plan, clients.answer):
        if id(client) not in forks:
            forks[id(client)] = _fork(client)
        members.append(forks[id(client)])
    return AgentClients(*members)


def _safe_name(question_id: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in question_id) or "_"


def run_benchmark(
    dataset_path: str | Path,
    config: PipelineConfig,
    clients: ChatClient | AgentClients,
    retriever: Retriever,
    output_dir: str | Path,
    workers: int = 1,
) -> BenchmarkReport:
    if workers < 1:
        raise ValueError("workers must be at least 1")
    started = time.monotonic()
    records, skipped = read_dataset(dataset_path)
    out = Path(output_dir)
    (out / TRACES_DIR).mkdir(parents=True, exist_ok=True)

    def one(record: DatasetRecord) -> QuestionResult:
        pipeline = Pipeline(config, fork_clients(clients), retriever)
        return pipeline.run_question(record.question, record.question_id)

    if workers == 1:
        results = [one(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, records))

    rows = []
    for record, result in zip(records, results):
        rows.append(score_row(result, record.golden_answers))
        result.trace.write(out / TRACES_DIR / f"{_safe_name(record.question_id)}.jsonl")
    results_path = out / RESULTS_FILE
    with open(results_path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    report = BenchmarkReport(
        str(dataset_path), aggregate(rows), skipped, RESULTS_FILE, round(time.monotonic() - started, 3)
    )
    (out / REPORT_FILE).write_text(report.to_json(), encoding="utf-8")
    return report


def read_results(path: str | Path) -> list[dict[str, Any]]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]
