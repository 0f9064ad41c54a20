"""Answer normalization, exact match, token F1 and the training reward."""

from __future__ import annotations

import re
import string
from collections import Counter
from typing import Sequence

from ..errors import PreconditionError

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = str.maketrans("", "", string.punctuation)

EM_WEIGHT = 0.3
F1_WEIGHT = 0.7


def normalize_answer(text: str) -> str:
    """Lowercase, strip ASCII punctuation, drop articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _golds(golds: Sequence[str]) -> Sequence[str]:
    if isinstance(golds, str) or not golds:
        raise PreconditionError("golds must be a non-empty sequence of strings")
    return golds


def exact_match(pred: str | None, golds: Sequence[str]) -> int:
    golds = _golds(golds)
    if pred is None:
        return 0
    norm = normalize_answer(pred)
    return int(any(norm == normalize_answer(g) for g in golds))


def _f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(pred: str | None, golds: Sequence[str]) -> float:
    golds = _golds(golds)
    tokens = normalize_answer(pred or "").split()
    return max(_f1(tokens, normalize_answer(g).split()) for g in golds)


def reward(pred: str | None, golds: Sequence[str]) -> float:
    return F1_WEIGHT * token_f1(pred, golds) + EM_WEIGHT * exact_match(pred, golds)
