"""Client for a JSON-over-HTTP retrieval service."""

from __future__ import annotations

import httpx

from ..errors import ToolFailure
from ..interpreter.values import DocumentSet, RetrievedDoc

DEFAULT_TIMEOUT_S = 30.0


def _snippet(body: bytes) -> str:
    return body[:200].decode("utf-8", errors="replace")


class RemoteRetriever:
    """POSTs ``{"query", "topk"}`` and expects ``{"results": [...]}``."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_S, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.client = client or httpx.Client(timeout=timeout)

    def search(self, query: str, k: int) -> DocumentSet:
        return remote_search(self.endpoint, query, k, self.timeout, self.client)


def remote_search(
    endpoint: str, query: str, k: int, timeout: float = DEFAULT_TIMEOUT_S, client: httpx.Client | None = None
) -> DocumentSet:
    owned = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        response = client.post(endpoint, json={"query": query, "topk": k}, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise ToolFailure(f"retrieval request to {endpoint} timed out after {timeout:g} s") from exc
    except httpx.HTTPError as exc:
        raise ToolFailure(f"retrieval request to {endpoint} failed: {exc}") from exc
    finally:
        if owned:
            client.close()
    body = response.content
    if not 200 <= response.status_code < 300:
        raise ToolFailure(f"retrieval service returned HTTP {response.status_code}: {_snippet(body)}")
    try:
        payload = response.json()
    except ValueError:
        raise ToolFailure(f"retrieval service returned invalid JSON (schema): {_snippet(body)}") from None
    results = payload.get("results") if isinstance(payload, dict) else None
    if not isinstance(results, list):
        raise ToolFailure(f"retrieval response missing 'results' list (schema): {_snippet(body)}")
    docs = []
    for item in results:
        if (
            not isinstance(item, dict)
            or not all(isinstance(item.get(f), str) for f in ("id", "text"))
            or not isinstance(item.get("title", ""), str)
            or not isinstance(item.get("score"), (int, float))
            or isinstance(item.get("score"), bool)
        ):
            raise ToolFailure(f"retrieval result has missing or mistyped fields (schema): {_snippet(body)}")
        docs.append(RetrievedDoc(item["id"], item.get("title", ""), item["text"], float(item["score"])))
    return DocumentSet(docs[:k], query, k)
