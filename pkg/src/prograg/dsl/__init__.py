"""Plan DSL: lexer, parser, renderer and linter."""

from .errors import LexError, PlanSyntaxError, SyntaxDiagnostic
from .lexer import strip_code_fences, tokenize
from .lint import LintWarning, lint_program
from .nodes import PlanProgram, SourceSpan
from .parser import parse_expression, parse_program
from .render import render_expr, render_program

__all__ = [
    "LexError",
    "LintWarning",
    "PlanProgram",
    "PlanSyntaxError",
    "SourceSpan",
    "SyntaxDiagnostic",
    "lint_program",
    "parse_expression",
    "parse_program",
    "render_expr",
    "render_program",
    "strip_code_fences",
    "tokenize",
]
