"""Plan execution: values, environment, trace and structured faults."""

from .core import Environment, ExecutionLimits, ExecutionOutcome, Interpreter, ToolHost, execute
from .errors import ERROR_KINDS, PlanRuntimeError, StructuredError
from .trace import ExecutionTrace, TraceEntry, TraceFormatError
from .values import DocumentSet, RetrievedDoc, render_value

__all__ = [
    "DocumentSet",
    "ERROR_KINDS",
    "Environment",
    "ExecutionLimits",
    "ExecutionOutcome",
    "ExecutionTrace",
    "Interpreter",
    "PlanRuntimeError",
    "RetrievedDoc",
    "StructuredError",
    "ToolHost",
    "TraceEntry",
    "TraceFormatError",
    "execute",
    "render_value",
]
