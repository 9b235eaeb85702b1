"""Local index families over chunks: lexical (Okapi BM25), vector, and graph.

All indices are built once and treated as immutable; queries are pure reads,
so concurrent retrieval needs no locking. The corpus is small enough
(thousands of chunks) that exhaustive k-NN is exact and fast.
"""

from __future__ import annotations

import json
import math
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .httpclient import post_json
from .ingest import Chunk

INDEX_SCHEMA_VERSION = 1

# Regulation identifiers ("1910.147", "2011-156") look like ordinary
# punctuation to a naive splitter; '.' and '-' are kept only when flanked
# by digits on both sides so those identifiers survive as single tokens.
_NON_TOKEN = re.compile(r"[^a-z0-9.\-]+")
_LOOSE_PUNCT = re.compile(r"(?<![0-9])[.\-]|[.\-](?![0-9])")

REGULATION_ID = re.compile(r"^\d+(?:[.\-]\d+)+$")


class IndexingError(ValueError):
    """Invalid index build input or query."""


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumerics, preserving digit-flanked
    '.' and '-' (regulation identifiers). No stopword removal, no stemming."""
    lowered = text.lower()
    lowered = _NON_TOKEN.sub(" ", lowered)
    lowered = _LOOSE_PUNCT.sub(" ", lowered)
    return lowered.split()


@dataclass
class TokenizedChunk:
    chunk_id: str
    tokens: list[str]


def tokenize_chunks(chunks: list[Chunk]) -> list[TokenizedChunk]:
    return [TokenizedChunk(c.chunk_id, tokenize(c.text)) for c in chunks]


# ---------------------------------------------------------------------------
# BM25
# ---------------------------------------------------------------------------

@dataclass
class Bm25Index:
    """Okapi BM25 statistics. Built once; read-only afterwards."""

    k1: float
    b: float
    doc_count: int
    doc_lengths: dict[str, int]
    avgdl: float
    term_doc_freq: dict[str, int]
    term_freq: dict[str, dict[str, int]]  # term -> chunk_id -> count


def bm25_build(chunks: list[TokenizedChunk], k1: float = 1.5, b: float = 0.75) -> Bm25Index:
    if not chunks or all(not c.tokens for c in chunks):
        raise IndexingError("bm25_build needs at least one chunk with at least one token")
    if k1 <= 0:
        raise IndexingError("k1 must be > 0")
    if not 0 <= b <= 1:
        raise IndexingError("b must be in [0, 1]")
    doc_lengths = {c.chunk_id: len(c.tokens) for c in chunks}
    term_freq: dict[str, dict[str, int]] = {}
    term_doc_freq: dict[str, int] = {}
    for c in chunks:
        counts: dict[str, int] = {}
        for t in c.tokens:
            counts[t] = counts.get(t, 0) + 1
        for t, n in counts.items():
            term_freq.setdefault(t, {})[c.chunk_id] = n
            term_doc_freq[t] = term_doc_freq.get(t, 0) + 1
    return Bm25Index(
        k1=k1,
        b=b,
        doc_count=len(chunks),
        doc_lengths=doc_lengths,
        avgdl=sum(doc_lengths.values()) / len(chunks),
        term_doc_freq=term_doc_freq,
        term_freq=term_freq,
    )


def bm25_idf(index: Bm25Index, term: str) -> float:
    n = index.term_doc_freq.get(term, 0)
    if n == 0:
        return 0.0
    return math.log((index.doc_count - n + 0.5) / (n + 0.5) + 1.0)


def bm25_score(index: Bm25Index, query_tokens: list[str], chunk_id: str) -> float:
    """Sum over query terms of IDF(t) * f(t,d)*(k1+1) / (f + k1*(1-b+b*|d|/avgdl)).

    The +1 inside the IDF logarithm keeps every term contribution, and hence
    the score, non-negative. Terms absent from the corpus contribute zero.
    """
    if chunk_id not in index.doc_lengths:
        raise KeyError(f"unknown chunk_id {chunk_id!r}")
    dl = index.doc_lengths[chunk_id]
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
    score = 0.0
    for t in query_tokens:
        postings = index.term_freq.get(t)
        if not postings:
            continue
        f = postings.get(chunk_id, 0)
        if f == 0:
            continue
        score += bm25_idf(index, t) * f * (index.k1 + 1.0) / (f + norm)
    return score


# ---------------------------------------------------------------------------
# Embeddings and vector index
# ---------------------------------------------------------------------------

class Embedder(Protocol):
    embedder_id: str

    def embed(self, text: str) -> np.ndarray: ...


class TrigramEmbedder:
    """Offline fallback embedder: hashed character-trigram counts.

    Trigrams of the lowercased text are hashed (crc32, stable across
    processes) into a fixed number of buckets; the count vector is
    L2-normalized. Deterministic, dependency-free, and good enough to give
    related texts a meaningful cosine similarity.
    """

    def __init__(self, dims: int = 256):
        self.dims = dims
        self.embedder_id = f"trigram-crc32-{dims}"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dims, dtype=np.float64)
        lowered = text.lower()
        for i in range(len(lowered) - 2):
            bucket = zlib.crc32(lowered[i : i + 3].encode("utf-8")) % self.dims
            vec[bucket] += 1.0
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec


class RemoteEmbedder:
    """Embeddings from an HTTP provider (POST {base}/embeddings)."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.embedder_id = f"remote:{model}"

    def embed(self, text: str) -> np.ndarray:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        data = post_json(
            f"{self.base_url}/embeddings",
            {"model": self.model, "input": text},
            headers=headers,
            timeout=self.timeout,
        )
        vec = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec


@dataclass
class VectorIndex:
    vectors: dict[str, np.ndarray]
    embedder_id: str

    @property
    def dims(self) -> int:
        first = next(iter(self.vectors.values()))
        return int(first.shape[0])


def build_vector_index(chunks: list[Chunk], embedder: Embedder) -> VectorIndex:
    if not chunks:
        raise IndexingError("cannot build a vector index over zero chunks")
    vectors = {c.chunk_id: embedder.embed(c.text) for c in chunks}
    dims = {v.shape[0] for v in vectors.values()}
    if len(dims) != 1:
        raise IndexingError(f"embedder produced mixed dimensionalities: {sorted(dims)}")
    return VectorIndex(vectors=vectors, embedder_id=embedder.embedder_id)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def knn(index: VectorIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exhaustive top-k by cosine similarity, descending; ties broken by
    ascending chunk_id. k=0 returns []; k beyond the corpus returns all."""
    if k < 0:
        raise IndexingError("k must be >= 0")
    if query.shape[0] != index.dims:
        raise IndexingError(f"query has {query.shape[0]} dims, index has {index.dims}")
    if k == 0:
        return []
    scored = [(cid, cosine(query, vec)) for cid, vec in index.vectors.items()]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


# ---------------------------------------------------------------------------
# Chunk graph
# ---------------------------------------------------------------------------

EDGE_SAME_DOCUMENT = "same_document"
EDGE_ADJACENT_SECTION = "adjacent_section"
EDGE_SHARED_REFERENCE = "shared_reference"


@dataclass
class ChunkGraph:
    """Undirected typed adjacency over chunk ids. Edges stored canonically
    ordered (min_id, max_id, edge_type); no self-loops."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str, str]]

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b, _ in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def regulation_ids(text: str) -> set[str]:
    return {t for t in tokenize(text) if REGULATION_ID.match(t)}


def build_graph(chunks: list[Chunk]) -> ChunkGraph:
    """Edges: same_document between all chunk pairs of one document,
    adjacent_section between consecutive sections of a document (page
    order), shared_reference between any two chunks citing a common
    regulation identifier."""
    if not chunks:
        raise IndexingError("cannot build a graph over zero chunks")
    edges: set[tuple[str, str, str]] = set()

    def add(a: str, b: str, kind: str) -> None:
        if a != b:
            edges.add((min(a, b), max(a, b), kind))

    by_doc: dict[str, list[Chunk]] = {}
    for c in chunks:
        by_doc.setdefault(c.doc_id, []).append(c)
    for doc_chunks in by_doc.values():
        ordered = sorted(doc_chunks, key=lambda c: (c.page_start, c.page_end, c.chunk_id))
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                add(a.chunk_id, b.chunk_id, EDGE_SAME_DOCUMENT)
        for a, b in zip(ordered, ordered[1:]):
            add(a.chunk_id, b.chunk_id, EDGE_ADJACENT_SECTION)

    refs = {c.chunk_id: regulation_ids(c.text) for c in chunks}
    ids = sorted(refs)
    for i, a in enumerate(ids):
        if not refs[a]:
            continue
        for b in ids[i + 1 :]:
            if refs[a] & refs[b]:
                add(a, b, EDGE_SHARED_REFERENCE)

    return ChunkGraph(nodes=frozenset(c.chunk_id for c in chunks), edges=frozenset(edges))


# ---------------------------------------------------------------------------
# Persistence (versioned JSON files alongside the corpus manifest)
# ---------------------------------------------------------------------------

def save_indices(out_dir: Path, bm25: Bm25Index, vectors: VectorIndex, graph: ChunkGraph) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bm25.json").write_text(
        json.dumps(
            {
                "schema_version": INDEX_SCHEMA_VERSION,
                "k1": bm25.k1,
                "b": bm25.b,
                "doc_count": bm25.doc_count,
                "doc_lengths": bm25.doc_lengths,
                "avgdl": bm25.avgdl,
                "term_doc_freq": bm25.term_doc_freq,
                "term_freq": bm25.term_freq,
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    (out_dir / "vectors.json").write_text(
        json.dumps(
            {
                "schema_version": INDEX_SCHEMA_VERSION,
                "embedder_id": vectors.embedder_id,
                "vectors": {cid: vec.tolist() for cid, vec in sorted(vectors.vectors.items())},
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    (out_dir / "graph.json").write_text(
        json.dumps(
            {
                "schema_version": INDEX_SCHEMA_VERSION,
                "nodes": sorted(graph.nodes),
                "edges": sorted(list(e) for e in graph.edges),
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )


def load_indices(index_dir: Path) -> tuple[Bm25Index, VectorIndex, ChunkGraph]:
    index_dir = Path(index_dir)
    b = json.loads((index_dir / "bm25.json").read_text(encoding="utf-8"))
    bm25 = Bm25Index(
        k1=b["k1"],
        b=b["b"],
        doc_count=b["doc_count"],
        doc_lengths=b["doc_lengths"],
        avgdl=b["avgdl"],
        term_doc_freq=b["term_doc_freq"],
        term_freq=b["term_freq"],
    )
    v = json.loads((index_dir / "vectors.json").read_text(encoding="utf-8"))
    vectors = VectorIndex(
        vectors={cid: np.asarray(vec, dtype=np.float64) for cid, vec in v["vectors"].items()},
        embedder_id=v["embedder_id"],
    )
    g = json.loads((index_dir / "graph.json").read_text(encoding="utf-8"))
    graph = ChunkGraph(nodes=frozenset(g["nodes"]), edges=frozenset(tuple(e) for e in g["edges"]))
    return bm25, vectors, graph
