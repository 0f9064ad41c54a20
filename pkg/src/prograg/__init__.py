"""Multi-hop question answering through generated, executable retrieval plans.

A planner model writes a small Python-subset program that chains
``retrieve`` and ``answer`` calls; a sandboxed interpreter runs it, widens
retrieval for under-evidenced steps, and feeds runtime faults back to the
planner for bounded self-repair.
"""

from .errors import PreconditionError, ToolFailure
from .pipeline import AgentClients, CallStats, Pipeline, PipelineConfig, QuestionResult, count_llm_calls, run_question

__version__ = "0.1.0"

__all__ = [
    "AgentClients",
    "CallStats",
    "Pipeline",
    "PipelineConfig",
    "PreconditionError",
    "QuestionResult",
    "ToolFailure",
    "count_llm_calls",
    "run_question",
]
