"""Chat clients, prompt templates and reply parsers."""

from .client import ChatClient, ChatMessage, GenerationParams, HttpChatClient, PromptTag
from .extract import ExtractionError, ParseError, extract_answer_span, parse_subquery_json
from .replay import ReplayChatClient, ReplayMiss, read_script
from .templates import TEMPLATE_IDS, PromptTemplate, TemplateError, get_template, render

__all__ = [
    "ChatClient",
    "ChatMessage",
    "ExtractionError",
    "GenerationParams",
    "HttpChatClient",
    "ParseError",
    "PromptTag",
    "PromptTemplate",
    "ReplayChatClient",
    "ReplayMiss",
    "TEMPLATE_IDS",
    "TemplateError",
    "extract_answer_span",
    "get_template",
    "parse_subquery_json",
    "read_script",
    "render",
]
