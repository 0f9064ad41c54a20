"""Retrieval backends: local BM25 and a remote HTTP service."""

from .bm25 import CorpusDoc, CorpusError, LexicalIndex, build_index, open_index, read_corpus, tokenize
from .remote import RemoteRetriever, remote_search

__all__ = [
    "CorpusDoc",
    "CorpusError",
    "LexicalIndex",
    "RemoteRetriever",
    "build_index",
    "open_index",
    "read_corpus",
    "remote_search",
    "tokenize",
]
