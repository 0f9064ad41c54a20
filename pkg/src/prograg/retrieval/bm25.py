"""BM25 lexical index over a JSONL corpus with a JSON sidecar cache."""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..errors import PreconditionError
from ..interpreter.values import DocumentSet, RetrievedDoc

K1 = 1.2
B = 0.75
SIDECAR_SUFFIX = ".bm25.json"
SIDECAR_VERSION = 1

_NON_ALNUM = re.compile(r"[\W_]+")


class CorpusError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, replace non-alphanumerics with spaces, split on whitespace."""
    return _NON_ALNUM.sub(" ", text.lower()).split()


@dataclass(frozen=True)
class CorpusDoc:
    doc_id: str
    title: str
    text: str


def read_corpus(path: str | Path) -> list[CorpusDoc]:
    path = Path(path)
    docs: list[CorpusDoc] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for number, raw in enumerate(handle, 1):
            if not raw.strip():
                continue
            try:
                row = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {number}: invalid JSON ({exc.msg})") from None
            if not isinstance(row, dict) or not all(isinstance(row.get(f), str) for f in ("id", "title", "text")):
                raise CorpusError(f"{path}: line {number}: expected an object with string fields id, title, text")
            if row["id"] in seen:
                raise CorpusError(f"{path}: line {number}: duplicate id {row['id']!r}")
            seen.add(row["id"])
            docs.append(CorpusDoc(row["id"], row["title"], row["text"]))
    return docs


class LexicalIndex:
    def __init__(self, docs: list[CorpusDoc], doc_lengths: list[int], postings: dict[str, list[tuple[int, int]]]):
        self.docs = docs
        self.doc_lengths = doc_lengths
        self.postings = postings
        self.doc_count = len(docs)
        self.avg_doc_length = sum(doc_lengths) / len(doc_lengths) if doc_lengths else 0.0

    @classmethod
    def from_docs(cls, docs: list[CorpusDoc]) -> LexicalIndex:
        lengths: list[int] = []
        postings: dict[str, list[tuple[int, int]]] = {}
        for index, doc in enumerate(docs):
            tokens = tokenize(f"{doc.title} {doc.text}")
            lengths.append(len(tokens))
            for term, tf in sorted(Counter(tokens).items()):
                postings.setdefault(term, []).append((index, tf))
        return cls(docs, lengths, postings)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def score_all(self, query: str) -> dict[int, float]:
        scores: dict[int, float] = {}
        avgdl = self.avg_doc_length or 1.0
        for term in tokenize(query):
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for index, tf in plist:
                norm = tf + K1 * (1.0 - B + B * self.doc_lengths[index] / avgdl)
                scores[index] = scores.get(index, 0.0) + idf * tf * (K1 + 1.0) / norm
        return scores

    def search(self, query: str, k: int) -> DocumentSet:
        if k < 1:
            raise PreconditionError(f"k must be at least 1, got {k}")
        scores = self.score_all(query)
        ranked = sorted(scores.items(), key=lambda item: (-item[1], self.docs[item[0]].doc_id))[:k]
        docs = [
            RetrievedDoc(self.docs[i].doc_id, self.docs[i].title, self.docs[i].text, score) for i, score in ranked
        ]
        return DocumentSet(docs, query, k)

    # -- persistence -------------------------------------------------------

    def to_json(self, corpus_digest: str = "") -> dict:
        return {
            "version": SIDECAR_VERSION,
            "corpus_sha256": corpus_digest,
            "k1": K1,
            "b": B,
            "docs": [[d.doc_id, d.title, d.text] for d in self.docs],
            "doc_lengths": self.doc_lengths,
            "postings": self.postings,
        }

    @classmethod
    def from_json(cls, data: dict) -> LexicalIndex:
        if data.get("version") != SIDECAR_VERSION:
            raise CorpusError("unsupported index sidecar version")
        docs = [CorpusDoc(*row) for row in data["docs"]]
        postings = {term: [tuple(p) for p in plist] for term, plist in data["postings"].items()}
        for plist in postings.values():
            for index, _ in plist:
                if not 0 <= index < len(docs):
                    raise CorpusError("index sidecar references a missing document")
        return cls(docs, list(data["doc_lengths"]), postings)

    def save(self, path: str | Path, corpus_digest: str = "") -> None:
        Path(path).write_text(json.dumps(self.to_json(corpus_digest), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> LexicalIndex:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: corrupt index sidecar ({exc.msg})") from None
        return cls.from_json(data)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sidecar_path(corpus_path: str | Path) -> Path:
    corpus_path = Path(corpus_path)
    return corpus_path.with_name(corpus_path.name + SIDECAR_SUFFIX)


def build_index(corpus_path: str | Path, out_path: str | Path | None = None, persist: bool = True) -> LexicalIndex:
    """Index *corpus_path* and write the sidecar (default ``<corpus>.bm25.json``)."""
    docs = read_corpus(corpus_path)
    index = LexicalIndex.from_docs(docs)
    if persist:
        index.save(out_path or sidecar_path(corpus_path), file_digest(corpus_path))
    return index


def open_index(corpus_path: str | Path, persist: bool = False) -> LexicalIndex:
    """Reuse an up-to-date sidecar when present, otherwise build from the corpus."""
    sidecar = sidecar_path(corpus_path)
    if sidecar.exists():
        try:
            data = json.loads(sidecar.read_text(encoding="utf-8"))
            if data.get("corpus_sha256") == file_digest(corpus_path):
                return LexicalIndex.from_json(data)
        except (json.JSONDecodeError, CorpusError, KeyError, TypeError):
            pass
    return build_index(corpus_path, persist=persist)
