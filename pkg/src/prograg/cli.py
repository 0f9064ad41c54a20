"""Command-line entry point: index, ask, eval, trace, parse."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import config as C
from .dsl import PlanSyntaxError, lint_program, parse_program, render_program
from .errors import ToolFailure
from .interpreter import trace as TR
from .interpreter.trace import ExecutionTrace, TraceEntry, TraceFormatError
from .llm.client import HttpChatClient
from .llm.replay import ReplayChatClient, ReplayScriptError
from .pipeline import (
    ANSWERED,
    DECOMPOSE_FALLBACK_ANSWERED,
    TOOL_FAILURE_STATUS,
    AgentClients,
    Pipeline,
)
from .retrieval import CorpusError, RemoteRetriever, build_index, open_index

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED_ANSWER = 2

DOC_PREVIEW = 120
CELL_WIDTH = 60


class CliError(Exception):
    pass


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--replay", action="append", help="replay script (JSONL); repeatable; disables network chat")
    parser.add_argument("--corpus", help="JSONL corpus for the local retriever")
    parser.add_argument("--k0", type=int, help="default retrieval depth")
    parser.add_argument("--k1", type=int, help="boosted retrieval depth")
    parser.add_argument("--max-repairs", type=int, help="self-repair rounds (0 disables repair)")
    parser.add_argument("--workers", type=int, help="concurrent questions during eval")
    parser.add_argument("--merge", action="store_true", default=None, help="merge decomposition into the planning call")
    parser.add_argument("--out", help="trace file (ask) or output directory (eval)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prograg", description="Program-guided retrieval-augmented QA")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a BM25 index for a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", help="index path (default: <corpus>.bm25.json)")

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("question")
    p.add_argument("--show-trace", action="store_true", help="print the step table")
    _common(p)

    p = sub.add_parser("eval", help="run a dataset and write a report")
    p.add_argument("dataset")
    _common(p)

    p = sub.add_parser("trace", help="render a trace file")
    p.add_argument("path")
    p.add_argument("--step", type=int, help="dump one entry in full")
    p.add_argument("--errors-only", action="store_true", help="show error entries only")

    p = sub.add_parser("parse", help="parse a plan file and report diagnostics")
    p.add_argument("path")
    p.add_argument("--render", action="store_true", help="print the canonical rendering")
    p.add_argument("--hops", type=int, help="expected sub-query count for lint")
    return parser


def settings_from_args(args: argparse.Namespace, out_key: str) -> dict[str, Any]:
    file_values = C.load_file(args.config) if args.config else {}
    flags = {
        "retrieval.corpus": args.corpus,
        "retrieval.k0": args.k0,
        "retrieval.k1": args.k1,
        "pipeline.max_repairs": args.max_repairs,
        "pipeline.merge_decompose_plan": args.merge,
        "eval.workers": args.workers,
        out_key: args.out,
    }
    return C.resolve(file_values, flags)


def make_retriever(settings: dict[str, Any]):
    backend = settings["retrieval.backend"]
    if backend == "remote":
        endpoint = settings["endpoints.retrieval"]
        if not endpoint:
            raise CliError("retrieval.backend is remote but endpoints.retrieval is not set")
        return RemoteRetriever(endpoint)
    if backend != "local":
        raise CliError(f"unknown retrieval backend {backend!r}")
    corpus = settings["retrieval.corpus"]
    if not corpus:
        raise CliError("no corpus configured (use --corpus or retrieval.corpus)")
    return open_index(corpus)


def make_clients(settings: dict[str, Any], replay: Sequence[str] | None) -> AgentClients:
    if replay:
        return AgentClients.shared(ReplayChatClient.from_file(*replay))
    clients = {}
    for agent in ("decompose", "plan", "answer"):
        url = C.chat_endpoint(settings, agent)
        if not url:
            raise CliError(f"no chat endpoint for the {agent} agent (set endpoints.chat or endpoints.{agent})")
        clients[agent] = HttpChatClient(url)
    return AgentClients(**clients)


def _clip(text: str, width: int) -> str:
    text = " ".join(str(text).split())
    return text if len(text) <= width else text[: width - 3] + "..."


def _summary(entry: TraceEntry) -> tuple[str, str]:
    inputs = entry.inputs or {}
    if entry.kind in (TR.TOOL_RETRIEVE, TR.TOOL_ANSWER):
        detail = str(inputs.get("query", ""))
    elif entry.kind == TR.ADAPTIVE_RERETRIEVE:
        detail = f"{inputs.get('query', '')} (k {inputs.get('previous_k')} -> {entry.k})"
    elif entry.kind == TR.LLM_PLAN:
        detail = f"{inputs.get('kind', '')} round {inputs.get('round', 0)}"
    elif entry.kind == TR.LLM_DECOMPOSE:
        detail = str(inputs.get("question", ""))
    else:
        detail = entry.source
    output = entry.output
    if entry.kind == TR.TOOL_RETRIEVE:
        output = ", ".join(d.get("doc_id", "") for d in output or [])
    elif entry.kind == TR.ADAPTIVE_RERETRIEVE:
        output = (output or {}).get("answer", "")
    elif entry.kind == TR.LLM_DECOMPOSE:
        output = " | ".join((output or {}).get("sub_queries", []))
    elif entry.kind == TR.ERROR:
        output = f"{(output or {}).get('kind')}: {(output or {}).get('message')}"
    elif not isinstance(output, str):
        output = json.dumps(output, ensure_ascii=False)
    return detail, str(output)


def render_table(entries: Sequence[TraceEntry]) -> str:
    headers = ("step", "round", "line", "kind", "k", "calls", "input", "output")
    rows = []
    for e in entries:
        detail, output = _summary(e)
        rows.append(
            (
                str(e.step),
                str(e.repair_round),
                str(e.line),
                e.kind,
                "" if e.k is None else str(e.k),
                str(e.chat_calls),
                _clip(detail, CELL_WIDTH),
                _clip(output, CELL_WIDTH),
            )
        )
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows)
    return "\n".join(lines)


def _truncate_docs(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: (_clip(v, DOC_PREVIEW) if k == "text" and isinstance(v, str) else _truncate_docs(v)) for k, v in value.items()}
    if isinstance(value, list):
        return [_truncate_docs(v) for v in value]
    return value


def render_entry(entry: TraceEntry) -> str:
    return json.dumps(_truncate_docs(entry.to_dict()), ensure_ascii=False, indent=2)


def cmd_index(args: argparse.Namespace) -> int:
    index = build_index(args.corpus, args.out)
    target = args.out or f"{args.corpus}.bm25.json"
    print(f"indexed {index.doc_count} docs (average length {index.avg_doc_length:.1f} tokens) -> {target}")
    return EXIT_OK


def cmd_ask(args: argparse.Namespace) -> int:
    settings = settings_from_args(args, "trace.path")
    config = C.pipeline_config(settings)
    pipeline = Pipeline(config, make_clients(settings, args.replay), make_retriever(settings))
    result = pipeline.run_question(args.question)
    trace_path = Path(settings["trace.path"])
    result.trace.write(trace_path)
    if args.show_trace:
        print(render_table(list(result.trace)))
    if result.status == TOOL_FAILURE_STATUS:
        message = result.error.message if result.error else "tool failure"
        print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR
    if result.status in (ANSWERED, DECOMPOSE_FALLBACK_ANSWERED):
        print(result.predicted)
        return EXIT_OK
    detail = result.error.render() if result.error else "no answer"
    print(f"no answer ({result.status}):\n{detail}", file=sys.stderr)
    return EXIT_FAILED_ANSWER


def cmd_eval(args: argparse.Namespace) -> int:
    from .evaluation.benchmark import run_benchmark

    settings = settings_from_args(args, "eval.output_dir")
    config = C.pipeline_config(settings)
    report = run_benchmark(
        args.dataset,
        config,
        make_clients(settings, args.replay),
        make_retriever(settings),
        settings["eval.output_dir"],
        workers=settings["eval.workers"],
    )
    print(report.summary())
    print(f"report written to {Path(settings['eval.output_dir']) / 'report.json'}")
    return EXIT_OK


def cmd_trace(args: argparse.Namespace) -> int:
    trace = ExecutionTrace.read(args.path)
    if args.step is not None:
        matches = [e for e in trace if e.step == args.step]
        if not matches:
            last = trace[len(trace) - 1].step if len(trace) else 0
            raise CliError(f"step {args.step} is out of range (trace has steps 1..{last})")
        print(render_entry(matches[0]))
        return EXIT_OK
    entries = [e for e in trace if not args.errors_only or e.kind == TR.ERROR]
    print(render_table(entries))
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    source = Path(args.path).read_text(encoding="utf-8")
    try:
        program = parse_program(source)
    except PlanSyntaxError as exc:
        print(f"{args.path}: {exc.diagnostic.render()}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{args.path}: ok, {len(program.statements)} top-level statements")
    for warning in lint_program(program, args.hops):
        print(f"warning: {warning.render()}")
    if args.render:
        print(render_program(program), end="")
    return EXIT_OK


COMMANDS = {"index": cmd_index, "ask": cmd_ask, "eval": cmd_eval, "trace": cmd_trace, "parse": cmd_parse}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CliError, C.ConfigError, CorpusError, TraceFormatError, ReplayScriptError, ToolFailure) as exc:
        message = f"{args.path}: {exc}" if isinstance(exc, TraceFormatError) else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        where = f": {exc.filename}" if exc.filename else ""
        print(f"error: {exc.strerror or exc}{where}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
