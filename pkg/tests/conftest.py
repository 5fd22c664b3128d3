import numpy as np
import pytest

from conceptrank.corpus import Paper, Qrels, Query
from conceptrank.embeddings import FileEmbeddingProvider
from conceptrank.indexing import concept_vectors
from conceptrank.llm import MockProvider
from conceptrank.ranking import Pipeline, PipelineConfig
from conceptrank.retrievers import DenseIndex, DenseRetriever, QueryVectorLookup
from conceptrank.synthetic import SyntheticSpec, generate


@pytest.fixture
def toy_papers():
    return [
        Paper("a", "Neural ranking models", "We rank documents with neural networks and scoring."),
        Paper("b", "Sparse retrieval", "Term matching with inverted indexes for retrieval."),
        Paper("c", "Dense retrieval", "Vector embeddings enable dense retrieval of documents."),
    ]


@pytest.fixture(scope="session")
def small_world():
    """60 docs / 6 topics, mild noise; shared by module-level tests."""
    return generate(SyntheticSpec(n_docs=60, n_topics=6, embedding_dim=16, noise_scale=0.4, seed=3))


def build_world_pipeline(world, ablation="none", rerank_pool=None, clock=None, provider=None, k=50):
    """Dense-retriever pipeline over a synthetic world's gold index."""
    from conceptrank.classifier import ClassifierParams, TrainingConfig

    index = world.gold_index()
    emb = FileEmbeddingProvider(world.concept_matrix)
    cache = concept_vectors(index, emb)
    dense = DenseRetriever(
        DenseIndex(world.paper_matrix, [p.id for p in world.papers]),
        QueryVectorLookup(world.query_matrix),
    )
    config = PipelineConfig(
        k=k,
        n_prf_docs=20,
        rerank_pool=rerank_pool or max(len(world.papers), 20),
        ablation=ablation,
    )
    classifier = ClassifierParams.initial(
        world.topic_matrix.data.astype(float),
        list(world.label_space),
        TrainingConfig(learning_rate=0.05, epochs=1, alpha=0.01),
    )
    kwargs = {}
    if clock is not None:
        kwargs["clock"] = clock
    return Pipeline(
        dense,
        index,
        cache,
        provider if provider is not None else MockProvider(world.scripted_rule()),
        config,
        titles=world.titles(),
        classifier=classifier,
        embedding_provider=emb,
        query_vectors=QueryVectorLookup(world.query_matrix),
        **kwargs,
    )
