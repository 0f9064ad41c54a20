from __future__ import annotations

import json

import pytest

from conftest import FIXTURES, REPLAY, corpus_index
from prograg.evaluation import read_dataset, run_benchmark
from prograg.evaluation.benchmark import aggregate, read_results
from prograg.evaluation.metrics import exact_match, reward, token_f1
from prograg.llm import ReplayChatClient
from prograg.pipeline import PipelineConfig

DATASET = FIXTURES / "datasets" / "fixture.jsonl"
MALFORMED = FIXTURES / "datasets" / "fixture_malformed.jsonl"


def bench(tmp_path, dataset=DATASET, workers=1, name="out"):
    client = ReplayChatClient.from_file(REPLAY / "dataset.jsonl")
    return run_benchmark(dataset, PipelineConfig(), client, corpus_index(), tmp_path / name, workers)


def test_fixture_dataset_scores_sixty(tmp_path):
    report = bench(tmp_path)
    assert report.em == pytest.approx(60.0)
    assert report.metrics["count"] == 5
    assert (tmp_path / "out" / "report.json").exists()
    assert sorted(p.stem for p in (tmp_path / "out" / "traces").glob("*.jsonl")) == sorted(
        r.question_id for r in read_dataset(DATASET)[0]
    )


def test_report_is_recomputable_from_results(tmp_path):
    report = bench(tmp_path)
    rows = read_results(tmp_path / "out" / "results.jsonl")
    for row in rows:
        golds = row["golden_answers"]
        assert row["em"] == exact_match(row["predicted"], golds)
        assert row["f1"] == token_f1(row["predicted"], golds)
        assert row["reward"] == reward(row["predicted"], golds)
    again = aggregate(rows)
    assert again == report.metrics
    n = len(rows)
    assert report.metrics["em"] == pytest.approx(100.0 * sum(r["em"] for r in rows) / n)
    assert report.metrics["avg_chat_calls"] == pytest.approx(sum(r["stats"]["chat_calls"] for r in rows) / n)
    assert sum(report.metrics["failure_histogram"].values()) == sum(1 for r in rows if not r["em"])


def test_reports_are_identical_across_runs_and_worker_counts(tmp_path):
    first = bench(tmp_path, name="a").to_json(timing=False)
    second = bench(tmp_path, name="b").to_json(timing=False)
    threaded = bench(tmp_path, workers=4, name="c").to_json(timing=False)
    assert first == second == threaded
    strip = lambda d: [{k: v for k, v in r.items() if k != "elapsed_s"} for r in read_results(d / "results.jsonl")]
    assert strip(tmp_path / "a") == strip(tmp_path / "c")


def test_malformed_line_is_skipped_with_its_number(tmp_path):
    report = bench(tmp_path, MALFORMED)
    assert report.metrics["count"] == 5
    assert [s.line for s in report.skipped] == [3]
    assert "skipped line 3" in report.summary()


def test_report_fields(tmp_path):
    bench(tmp_path)
    data = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
    for name in ("em", "f1", "reward", "avg_chat_calls", "repair_rate", "boost_rate", "failure_histogram"):
        assert name in data
    assert 0 <= data["em"] <= 100 and 0 <= data["f1"] <= 100


def test_read_dataset_validation(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(
        '{"id": "1", "question": "q?", "golden_answers": ["a"]}\n'
        '{"id": "2", "question": "q?", "golden_answers": "a"}\n'
        '{"id": "1", "question": "q?", "golden_answers": ["a"]}\n'
        "\n",
        encoding="utf-8",
    )
    records, skipped = read_dataset(path)
    assert [r.question_id for r in records] == ["1"]
    assert [s.line for s in skipped] == [2, 3]
    with pytest.raises(OSError):
        read_dataset(tmp_path / "missing.jsonl")


def test_workers_must_be_positive(tmp_path):
    with pytest.raises(ValueError):
        bench(tmp_path, workers=0)
