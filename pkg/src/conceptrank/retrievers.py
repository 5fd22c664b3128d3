"""First-stage retrievers: Okapi BM25, exact dense scan, and their fusion.

Each retriever produces a ScoredList of base scores for one query. Hybrid
fusion standardizes both score distributions over the union pool (z-score
with population standard deviation) and sums them, so it is invariant to
positive affine rescaling of either input.
"""

from __future__ import annotations

import math
import re
from collections import Counter

import numpy as np

from .corpus import Paper, Query, ScoredEntry, ScoredList

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric, drop tokens shorter than 2."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= 2]


def zscores(values: np.ndarray) -> np.ndarray:
    """Population z-scores; a zero-spread pool maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    std = float(values.std())
    if std == 0.0:
        return np.zeros_like(values)
    return (values - values.mean()) / std


class Bm25Index:
    """Inverted index over the corpus with Okapi BM25 scoring.

    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); the term-frequency part is
    f * (k1 + 1) / (f + k1 * (1 - b + b * dl / avgdl)). Query terms contribute
    once per occurrence, so duplicated terms double their contribution.
    """

    def __init__(self, papers: list[Paper], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.doc_ids = sorted(p.id for p in papers)
        order = {pid: i for i, pid in enumerate(self.doc_ids)}
        texts = {p.id: tokenize(p.text) for p in papers}
        self.doc_len = np.zeros(len(papers), dtype=np.float64)
        self.postings: dict[str, list[tuple[int, int]]] = {}
        for pid, toks in texts.items():
            i = order[pid]
            self.doc_len[i] = len(toks)
            for term, tf in Counter(toks).items():
                self.postings.setdefault(term, []).append((i, tf))
        for plist in self.postings.values():
            plist.sort()
        self.n_docs = len(papers)
        self.avg_len = float(self.doc_len.mean()) if self.n_docs else 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def scores(self, query_terms: list[str]) -> np.ndarray:
        out = np.zeros(self.n_docs, dtype=np.float64)
        for term in query_terms:
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for i, tf in plist:
                norm = tf + self.k1 * (1.0 - self.b + self.b * self.doc_len[i] / self.avg_len)
                out[i] += idf * tf * (self.k1 + 1.0) / norm
        return out


def bm25_search(index: Bm25Index, query: Query, top_n: int) -> ScoredList:
    """Top-n BM25 matches; zero-score documents are excluded."""
    scores = index.scores(tokenize(query.text))
    hits = [(index.doc_ids[i], float(s)) for i, s in enumerate(scores) if s != 0.0]
    hits.sort(key=lambda x: (-x[1], x[0]))
    entries = [ScoredEntry(pid, s, None, s) for pid, s in hits[:top_n]]
    return ScoredList(query.id, entries)


class DenseIndex:
    """Exact-scan dense retrieval over a paper embedding matrix."""

    def __init__(self, matrix, paper_ids: list[str]):
        missing = [pid for pid in paper_ids if pid not in matrix]
        if missing:
            raise ValueError(f"papers without embeddings: {missing[:5]}")
        self.matrix = matrix
        self.paper_ids = list(paper_ids)
        rows = np.stack([matrix.vector(pid) for pid in paper_ids]).astype(np.float64)
        norms = np.linalg.norm(rows, axis=1)
        self._zero_rows = norms == 0.0
        norms[self._zero_rows] = 1.0
        self._normed = rows / norms[:, None]

    @property
    def dim(self) -> int:
        return self.matrix.dim


def dense_search(index: DenseIndex, query_vector: np.ndarray, top_n: int, query_id: str = "") -> ScoredList:
    """Cosine of the query vector against every paper row, top-n by score."""
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query vector has shape {q.shape}, index dim is {index.dim}")
    nq = np.linalg.norm(q)
    if nq == 0.0:
        scores = np.zeros(len(index.paper_ids))
    else:
        scores = index._normed @ (q / nq)
        scores[index._zero_rows] = 0.0
        scores = np.clip(scores, -1.0, 1.0)
    ranked = sorted(zip(index.paper_ids, scores), key=lambda x: (-x[1], x[0]))[:top_n]
    entries = [ScoredEntry(pid, float(s), None, float(s)) for pid, s in ranked]
    return ScoredList(query_id, entries)


def hybrid_search(bm25: ScoredList, dense: ScoredList, top_n: int) -> ScoredList:
    """Fuse two rankings of the same query by summed pool z-scores.

    A document present in only one list takes the other list's minimum score
    before standardization; an empty input list contributes zero everywhere.
    """
    if bm25.query_id != dense.query_id:
        raise ValueError(f"rankings are for different queries: {bm25.query_id!r} vs {dense.query_id!r}")
    if not bm25.entries and not dense.entries:
        return ScoredList(bm25.query_id, [])
    pool = sorted({e.paper_id for e in bm25.entries} | {e.paper_id for e in dense.entries})

    def filled(lst: ScoredList) -> np.ndarray:
        if not lst.entries:
            return np.zeros(len(pool))
        by_id = {e.paper_id: e.s_base for e in lst.entries}
        floor = min(by_id.values())
        return np.array([by_id.get(pid, floor) for pid in pool], dtype=np.float64)

    fused = zscores(filled(bm25)) + zscores(filled(dense))
    ranked = sorted(zip(pool, fused), key=lambda x: (-x[1], x[0]))[:top_n]
    entries = [ScoredEntry(pid, float(s), None, float(s)) for pid, s in ranked]
    return ScoredList(bm25.query_id, entries)


class QueryVectorLookup:
    """Query vectors read from a precomputed matrix keyed by query id."""

    def __init__(self, matrix):
        self.matrix = matrix

    def query_vector(self, query: Query) -> np.ndarray:
        if query.id not in self.matrix:
            raise KeyError(f"no precomputed vector for query {query.id!r}")
        return self.matrix.vector(query.id)


class RemoteQueryVectors:
    """Query vectors from an embedding provider, with an optional instruction
    prefix for instruction-tuned encoders."""

    def __init__(self, provider, prefix: str = ""):
        self.provider = provider
        self.prefix = prefix

    def query_vector(self, query: Query) -> np.ndarray:
        return self.provider.embed([self.prefix + query.text])[0]


class Bm25Retriever:
    kind = "bm25"

    def __init__(self, index: Bm25Index):
        self.index = index

    def search(self, query: Query, top_n: int) -> ScoredList:
        return bm25_search(self.index, query, top_n)


class DenseRetriever:
    kind = "dense"

    def __init__(self, index: DenseIndex, query_vectors):
        self.index = index
        self.query_vectors = query_vectors

    def search(self, query: Query, top_n: int) -> ScoredList:
        return dense_search(self.index, self.query_vectors.query_vector(query), top_n, query.id)


class HybridRetriever:
    kind = "hybrid"

    def __init__(self, bm25: Bm25Retriever, dense: DenseRetriever):
        self.bm25 = bm25
        self.dense = dense

    def search(self, query: Query, top_n: int) -> ScoredList:
        return hybrid_search(self.bm25.search(query, top_n), self.dense.search(query, top_n), top_n)
