"""Concept-based semantic indexing and LLM-guided re-ranking for paper search.

The library indexes each paper with research topics (picked from a fixed
label space by a trained classifier plus an LLM) and key phrases (extracted
by the LLM), then re-ranks any base retriever's results by how well each
paper's concepts cover the core concepts an LLM identifies for the query.
"""

from .corpus import (
    LabelSpace,
    Paper,
    Qrels,
    Query,
    ScoredEntry,
    ScoredList,
    Topic,
    canonicalize,
    load_corpus,
    load_label_space,
    load_qrels,
    load_queries,
)
from .embeddings import (
    ConceptEmbeddingCache,
    EmbeddingMatrix,
    FileEmbeddingProvider,
    cosine,
    embed_concepts,
    load_matrix,
    save_matrix,
)
from .retrievers import (
    Bm25Index,
    Bm25Retriever,
    DenseIndex,
    DenseRetriever,
    HybridRetriever,
    bm25_search,
    dense_search,
    hybrid_search,
    tokenize,
)
from .classifier import (
    ClassifierParams,
    LabeledCorpus,
    TrainingConfig,
    loss_and_gradients,
    predict_candidates,
    predict_proba,
    train,
)
from .llm import (
    CallLedger,
    HttpChatProvider,
    LlmResponse,
    MockProvider,
    ParseFailure,
    PromptTemplate,
    RecordingProvider,
    ReplayProvider,
    TEMPLATES,
    complete,
    parse_tagged_list,
    render_prompt,
)
from .indexing import BuildReport, IndexEntry, SemanticIndex, build_entry, build_index, concept_vectors
from .ranking import (
    CandidateContext,
    CoreConcepts,
    Pipeline,
    PipelineConfig,
    collect_candidates,
    identify_core_concepts,
    rank_with_concepts,
    semantic_score,
)
from .evaluation import EvalReport, recall_at_k, run_eval, sweep_k
from .synthetic import SyntheticSpec, SyntheticWorld, generate

__version__ = "0.1.0"
