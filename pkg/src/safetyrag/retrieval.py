"""The six retrieval strategies behind a single router with one result schema.

Local strategies (bm25, vanilla, graph_eager, graph_mmr) are pure functions
of the built indices. The two remote strategies speak to a managed search
provider over HTTP when one is configured and otherwise fall back to local
stand-ins (TF-IDF cosine for keyword, embedder k-NN for semantic) so the
whole system runs offline.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import numpy as np

from .httpclient import post_json
from .indexing import (
    Bm25Index,
    ChunkGraph,
    Embedder,
    TrigramEmbedder,
    VectorIndex,
    bm25_build,
    bm25_score,
    build_graph,
    build_vector_index,
    cosine,
    knn,
    tokenize,
    tokenize_chunks,
)
from .ingest import Chunk

REMOTE_URL_ENV = "SAFETYRAG_REMOTE_URL"
REMOTE_KEY_ENV = "SAFETYRAG_REMOTE_API_KEY"


class RetrievalError(ValueError):
    """Unknown strategy, unbuilt index, or invalid provider result."""


class RetrievalStrategy(str, Enum):
    REMOTE_KEYWORD = "remote_keyword"
    REMOTE_SEMANTIC = "remote_semantic"
    BM25 = "bm25"
    GRAPH_EAGER = "graph_eager"
    GRAPH_MMR = "graph_mmr"
    VANILLA = "vanilla"


@dataclass(frozen=True)
class Citation:
    doc_id: str
    section_title: str
    page_start: int
    page_end: int


@dataclass
class RetrievedChunk:
    chunk_id: str
    score: float
    rank: int
    strategy: RetrievalStrategy
    citation: Citation
    provider: str | None = None  # set for remote strategies, for auditability


@dataclass
class GraphRetrievalParams:
    seed_count: int = 5
    max_depth: int = 1
    mmr_lambda: float = 0.5

    def validate(self) -> None:
        if self.seed_count < 1:
            raise RetrievalError("seed_count must be >= 1")
        if self.max_depth < 0:
            raise RetrievalError("max_depth must be >= 0")
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise RetrievalError("mmr_lambda must be in [0, 1]")


def validate_results(results: list[RetrievedChunk], known_ids: set[str]) -> None:
    """The router's uniform contract: contiguous ranks from 1, non-increasing
    scores, and every chunk id resolvable in the corpus."""
    for i, r in enumerate(results):
        if r.rank != i + 1:
            raise RetrievalError(f"rank gap at position {i}: got rank {r.rank}")
        if i > 0 and r.score > results[i - 1].score + 1e-12:
            raise RetrievalError(f"scores increase at rank {r.rank}")
        if r.chunk_id not in known_ids:
            raise RetrievalError(f"result references unknown chunk {r.chunk_id!r}")


class RemoteSearchProvider(Protocol):
    provider_id: str

    def search(self, mode: str, query: str, k: int) -> list[tuple[str, float]]: ...


class HttpRemoteSearch:
    """Managed retrieval provider contract: POST {base}/search with
    {mode, query, k}; response {"results": [{"chunk_id", "score"}, ...]}."""

    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.provider_id = f"remote:{self.base_url}"

    def search(self, mode: str, query: str, k: int) -> list[tuple[str, float]]:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        data = post_json(
            f"{self.base_url}/search",
            {"mode": mode, "query": query, "k": k},
            headers=headers,
            timeout=self.timeout,
        )
        return [(r["chunk_id"], float(r.get("score", 0.0))) for r in data.get("results", [])]


def remote_search_from_env() -> HttpRemoteSearch | None:
    url = os.environ.get(REMOTE_URL_ENV)
    if not url:
        return None
    return HttpRemoteSearch(url, api_key=os.environ.get(REMOTE_KEY_ENV))


class Router:
    """Holds the built indices and dispatches retrieval by strategy.

    Stateless over immutable indices; safe for unrestricted concurrent use.
    """

    def __init__(
        self,
        chunks: list[Chunk],
        bm25: Bm25Index,
        vectors: VectorIndex,
        graph: ChunkGraph,
        embedder: Embedder,
        remote: RemoteSearchProvider | None = None,
        graph_params: GraphRetrievalParams | None = None,
    ):
        if not chunks:
            raise RetrievalError("router needs a non-empty corpus")
        self.chunks = {c.chunk_id: c for c in chunks}
        self.bm25 = bm25
        self.vectors = vectors
        self.graph = graph
        self.embedder = embedder
        self.remote = remote
        self.graph_params = graph_params or GraphRetrievalParams()
        self._adjacency = graph.adjacency()
        self._tfidf = _TfidfScorer(chunks)

    def citation(self, chunk_id: str) -> Citation:
        c = self.chunks[chunk_id]
        return Citation(c.doc_id, c.section_title, c.page_start, c.page_end)

    def chunk_text(self, chunk_id: str) -> str:
        return self.chunks[chunk_id].text

    # -- dispatch ----------------------------------------------------------

    def retrieve(
        self,
        strategy: RetrievalStrategy | str,
        query: str,
        k: int,
        params: GraphRetrievalParams | None = None,
    ) -> list[RetrievedChunk]:
        try:
            strategy = RetrievalStrategy(strategy)
        except ValueError:
            raise RetrievalError(f"unknown retrieval strategy {strategy!r}") from None
        if k < 0:
            raise RetrievalError("k must be >= 0")
        if strategy is RetrievalStrategy.BM25:
            results = self.retrieve_bm25(query, k)
        elif strategy is RetrievalStrategy.VANILLA:
            results = self.retrieve_vanilla(query, k)
        elif strategy is RetrievalStrategy.GRAPH_EAGER:
            results = self.retrieve_graph_eager(query, k, params)
        elif strategy is RetrievalStrategy.GRAPH_MMR:
            results = self.retrieve_graph_mmr(query, k, params)
        elif strategy is RetrievalStrategy.REMOTE_KEYWORD:
            results = self.retrieve_remote("keyword", query, k)
        else:
            results = self.retrieve_remote("semantic", query, k)
        validate_results(results, set(self.chunks))
        return results

    # -- strategies --------------------------------------------------------

    def retrieve_bm25(self, query: str, k: int) -> list[RetrievedChunk]:
        """Rank all chunks by BM25; zero-score (lexically unrelated) hits are
        dropped rather than padded out to k."""
        if k == 0:
            return []
        q = tokenize(query)
        scored = [(cid, bm25_score(self.bm25, q, cid)) for cid in self.bm25.doc_lengths]
        scored = [(cid, s) for cid, s in scored if s > 0.0]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return self._wrap(scored[:k], RetrievalStrategy.BM25)

    def retrieve_vanilla(self, query: str, k: int) -> list[RetrievedChunk]:
        if k == 0:
            return []
        hits = knn(self.vectors, self.embedder.embed(query), k)
        return self._wrap(hits, RetrievalStrategy.VANILLA)

    def _graph_candidates(self, query_vec: np.ndarray, params: GraphRetrievalParams) -> list[str]:
        """Seeds = top-s by k-NN; candidates = all nodes within graph
        distance <= max_depth of any seed (breadth-first)."""
        seeds = [cid for cid, _ in knn(self.vectors, query_vec, params.seed_count)]
        seen = set(seeds)
        frontier = deque((s, 0) for s in seeds)
        while frontier:
            node, depth = frontier.popleft()
            if depth == params.max_depth:
                continue
            for nbr in self._adjacency.get(node, ()):
                if nbr not in seen:
                    seen.add(nbr)
                    frontier.append((nbr, depth + 1))
        return sorted(seen)

    def retrieve_graph_eager(
        self, query: str, k: int, params: GraphRetrievalParams | None = None
    ) -> list[RetrievedChunk]:
        """Expand outward from the k-NN seeds, then rank the whole
        neighborhood by cosine similarity to the query."""
        params = params or self.graph_params
        params.validate()
        if k == 0:
            return []
        qv = self.embedder.embed(query)
        candidates = self._graph_candidates(qv, params)
        scored = [(cid, cosine(qv, self.vectors.vectors[cid])) for cid in candidates]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return self._wrap(scored[:k], RetrievalStrategy.GRAPH_EAGER)

    def retrieve_graph_mmr(
        self, query: str, k: int, params: GraphRetrievalParams | None = None
    ) -> list[RetrievedChunk]:
        """Greedy maximal-marginal-relevance selection over the graph
        neighborhood: after a pure-relevance first pick, repeatedly take
        argmax of lambda*cos(d, query) - (1-lambda)*max_{s selected} cos(d, s).
        The reported score is the objective value at selection time."""
        params = params or self.graph_params
        params.validate()
        if k == 0:
            return []
        qv = self.embedder.embed(query)
        candidates = self._graph_candidates(qv, params)
        picked = mmr_select(
            candidates,
            lambda cid: cosine(qv, self.vectors.vectors[cid]),
            lambda a, b: cosine(self.vectors.vectors[a], self.vectors.vectors[b]),
            params.mmr_lambda,
            k,
        )
        return self._wrap(picked, RetrievalStrategy.GRAPH_MMR)

    def retrieve_remote(self, mode: str, query: str, k: int) -> list[RetrievedChunk]:
        """Search via the managed provider; without one, fall back locally
        (keyword -> TF-IDF cosine, semantic -> embedder k-NN)."""
        if mode not in ("keyword", "semantic"):
            raise RetrievalError(f"unknown remote mode {mode!r}")
        strategy = (
            RetrievalStrategy.REMOTE_KEYWORD if mode == "keyword" else RetrievalStrategy.REMOTE_SEMANTIC
        )
        if k == 0:
            return []
        if self.remote is not None:
            hits = self.remote.search(mode, query, k)[:k]
            for cid, _ in hits:
                if cid not in self.chunks:
                    raise RetrievalError(f"provider returned unknown chunk {cid!r}")
            return self._wrap(hits, strategy, provider=self.remote.provider_id)
        if mode == "keyword":
            hits = self._tfidf.top(query, k)
            return self._wrap(hits, strategy, provider="local-tfidf-fallback")
        hits = knn(self.vectors, self.embedder.embed(query), k)
        return self._wrap(hits, strategy, provider=f"local-{self.embedder.embedder_id}")

    def _wrap(
        self,
        hits: list[tuple[str, float]],
        strategy: RetrievalStrategy,
        provider: str | None = None,
    ) -> list[RetrievedChunk]:
        return [
            RetrievedChunk(
                chunk_id=cid,
                score=score,
                rank=i + 1,
                strategy=strategy,
                citation=self.citation(cid),
                provider=provider,
            )
            for i, (cid, score) in enumerate(hits)
        ]


def mmr_select(
    candidates: list[str],
    relevance,
    similarity,
    lam: float,
    k: int,
) -> list[tuple[str, float]]:
    """Greedy MMR over candidate ids; returns (id, objective-at-selection).

    With nothing selected yet, the redundancy term is undefined, so the
    first pick is by pure relevance (its score is its relevance). Ties at
    any step break by ascending id.
    """
    rel = {c: relevance(c) for c in candidates}
    remaining = sorted(candidates)
    selected: list[tuple[str, float]] = []
    while remaining and len(selected) < k:
        if not selected:
            best = min(remaining, key=lambda c: (-rel[c], c))
            best_val = rel[best]
        else:
            best, best_val = None, -math.inf
            for c in remaining:
                redundancy = max(similarity(c, s) for s, _ in selected)
                val = lam * rel[c] - (1.0 - lam) * redundancy
                if val > best_val or (val == best_val and (best is None or c < best)):
                    best, best_val = c, val
        selected.append((best, best_val))
        remaining.remove(best)
    return selected


class _TfidfScorer:
    """TF-IDF cosine ranking: the local stand-in for managed keyword search.

    Deliberately distinct from BM25 (raw tf, smoothed idf, cosine length
    normalization instead of the Okapi saturation curve).
    """

    def __init__(self, chunks: list[Chunk]):
        self.doc_tf: dict[str, dict[str, int]] = {}
        df: dict[str, int] = {}
        for c in chunks:
            counts: dict[str, int] = {}
            for t in tokenize(c.text):
                counts.setdefault(t, 0)
                counts[t] += 1
            self.doc_tf[c.chunk_id] = counts
            for t in counts:
                df[t] = df.get(t, 0) + 1
        n = len(chunks)
        self.idf = {t: math.log((1 + n) / (1 + d)) + 1.0 for t, d in df.items()}
        self.doc_norm = {
            cid: math.sqrt(sum((f * self.idf[t]) ** 2 for t, f in tf.items())) or 1.0
            for cid, tf in self.doc_tf.items()
        }

    def top(self, query: str, k: int) -> list[tuple[str, float]]:
        q_tf: dict[str, int] = {}
        for t in tokenize(query):
            if t in self.idf:
                q_tf[t] = q_tf.get(t, 0) + 1
        if not q_tf:
            return []
        q_norm = math.sqrt(sum((f * self.idf[t]) ** 2 for t, f in q_tf.items()))
        scored = []
        for cid, tf in self.doc_tf.items():
            dot = sum(
                (q_tf[t] * self.idf[t]) * (tf[t] * self.idf[t]) for t in q_tf if t in tf
            )
            if dot > 0.0:
                scored.append((cid, dot / (q_norm * self.doc_norm[cid])))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]


def build_router(
    chunks: list[Chunk],
    embedder: Embedder | None = None,
    remote: RemoteSearchProvider | None = None,
    k1: float = 1.5,
    b: float = 0.75,
    graph_params: GraphRetrievalParams | None = None,
) -> Router:
    """Build all three index families over `chunks` and wire up a router."""
    embedder = embedder or TrigramEmbedder()
    tokenized = tokenize_chunks(chunks)
    return Router(
        chunks=chunks,
        bm25=bm25_build(tokenized, k1=k1, b=b),
        vectors=build_vector_index(chunks, embedder),
        graph=build_graph(chunks),
        embedder=embedder,
        remote=remote,
        graph_params=graph_params,
    )
