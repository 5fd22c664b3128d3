"""The full query pipeline: retrieve, vote for candidate concepts, one LLM
call for core concepts, max-sim scoring, z-fusion re-ranking.

Printed per query: the concepts selected, the call budget spent, and recall
before and after re-ranking.
"""

from conceptrank import SyntheticSpec, generate, recall_at_k
from conceptrank.embeddings import FileEmbeddingProvider
from conceptrank.indexing import concept_vectors
from conceptrank.llm import MockProvider
from conceptrank.ranking import Pipeline, PipelineConfig
from conceptrank.retrievers import DenseIndex, DenseRetriever, QueryVectorLookup

world = generate(SyntheticSpec(n_docs=250, n_topics=25, embedding_dim=32, noise_scale=1.2, seed=0, n_queries=8))
index = world.gold_index()
embedding_provider = FileEmbeddingProvider(world.concept_matrix)
cache = concept_vectors(index, embedding_provider)

retriever = DenseRetriever(
    DenseIndex(world.paper_matrix, [p.id for p in world.papers]),
    QueryVectorLookup(world.query_matrix),
)
pipeline = Pipeline(
    retriever,
    index,
    cache,
    MockProvider(world.scripted_rule()),
    PipelineConfig(k=50, n_prf_docs=20, rerank_pool=250),
    titles=world.titles(),
    embedding_provider=embedding_provider,
)

for query in world.queries:
    result = pipeline.run(query)
    relevant = world.qrels.for_query(query.id)
    base = recall_at_k(result.base_ranking, relevant, 10)
    reranked = recall_at_k(result.ranking, relevant, 10)
    print(f"{query.id}  R@10 {base:.2f} -> {reranked:.2f}   "
          f"calls: {result.ledger['llm_calls']} LLM / {result.ledger['retriever_calls']} retriever")
    print(f"        core concepts: {', '.join(result.core.concepts()[:4])}, ...")
