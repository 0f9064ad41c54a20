"""Metrics, failure categorization and benchmark runs."""

from .benchmark import BenchmarkReport, DatasetRecord, read_dataset, run_benchmark
from .categorize import FailureCategory, categorize_failure
from .metrics import exact_match, normalize_answer, reward, token_f1

__all__ = [
    "BenchmarkReport",
    "DatasetRecord",
    "FailureCategory",
    "categorize_failure",
    "exact_match",
    "normalize_answer",
    "read_dataset",
    "reward",
    "run_benchmark",
    "token_f1",
]
