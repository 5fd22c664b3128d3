"""Base retrievers on a tiny corpus: BM25, dense cosine scan, and z-fusion."""

import numpy as np

from conceptrank import (
    Bm25Index,
    DenseIndex,
    EmbeddingMatrix,
    Paper,
    Query,
    bm25_search,
    dense_search,
    hybrid_search,
)

papers = [
    Paper("p1", "Evaluating text generation", "Multi-dimensional evaluation of generation models."),
    Paper("p2", "Dense passage retrieval", "Encoding queries and passages into one vector space."),
    Paper("p3", "Sparse retrieval with BM25", "Term matching with inverted indexes and length normalization."),
    Paper("p4", "Key phrase extraction", "Extracting salient phrases from scientific abstracts."),
]

query = Query("q1", "evaluation of generation models")

# sparse: classic Okapi scoring, zero-score documents excluded
bm25 = bm25_search(Bm25Index(papers, k1=1.2, b=0.75), query, top_n=4)
print("BM25:")
for e in bm25.entries:
    print(f"  {e.paper_id}  {e.s_base:.4f}")

# dense: exact cosine scan over precomputed vectors (random stand-ins here)
rng = np.random.default_rng(0)
vectors = rng.standard_normal((4, 16)).astype(np.float32)
vectors[0] += 2 * vectors[1]  # make p1 and p2 neighbours
matrix = EmbeddingMatrix([p.id for p in papers], vectors)
dense = dense_search(DenseIndex(matrix, [p.id for p in papers]), vectors[0], top_n=4, query_id="q1")
print("dense:")
for e in dense.entries:
    print(f"  {e.paper_id}  {e.s_base:.4f}")

# hybrid: per-list z-scores summed over the union pool
fused = hybrid_search(bm25, dense, top_n=4)
print("hybrid (z-sum):")
for e in fused.entries:
    print(f"  {e.paper_id}  {e.s_final:+.4f}")
