"""Recall@K evaluation with efficiency columns, plus the candidate-size sweep.

Ablations plug in through one config switch; the summary table mirrors the
per-query call accounting (#RET, #LLM, generated tokens, wall time).
"""

from conceptrank import SyntheticSpec, generate, run_eval, sweep_k
from conceptrank.evaluation import pipeline_with_k, sweep_table
from conceptrank.embeddings import FileEmbeddingProvider
from conceptrank.indexing import concept_vectors
from conceptrank.llm import MockProvider
from conceptrank.ranking import Pipeline, PipelineConfig
from conceptrank.retrievers import DenseIndex, DenseRetriever, QueryVectorLookup

world = generate(SyntheticSpec(n_docs=120, n_topics=12, embedding_dim=32, noise_scale=0.9, seed=2, n_queries=24))
index = world.gold_index()
embedding_provider = FileEmbeddingProvider(world.concept_matrix)
cache = concept_vectors(index, embedding_provider)
retriever = DenseRetriever(
    DenseIndex(world.paper_matrix, [p.id for p in world.papers]),
    QueryVectorLookup(world.query_matrix),
)


def make_pipeline(ablation="none", k=50):
    return Pipeline(
        retriever, index, cache, MockProvider(world.scripted_rule()),
        PipelineConfig(k=k, n_prf_docs=20, rerank_pool=120, ablation=ablation),
        titles=world.titles(), embedding_provider=embedding_provider,
    )


for ablation in ("none", "no_phrase", "no_llm_freq"):
    report = run_eval(world.queries, world.qrels, make_pipeline(ablation), ks=[5, 10])
    print(f"\nablation={ablation}")
    print(report.table())

print("\ncandidate-size sweep:")
results = sweep_k(world.queries, world.qrels, lambda k: make_pipeline(k=k), ks=[10])
print(sweep_table(results))
