"""Online concept-guided re-ranking.

Per query: the base retriever's top documents vote for candidate concepts
(pseudo-relevance feedback over the semantic index), one LLM call selects the
core concepts, each pooled document is scored by averaged max cosine between
the core concepts and its indexed concepts, and the final order comes from
summing pool z-scores of the base and semantic signals. Ablation switches
disable topics, phrases, the corpus candidates, or the LLM itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import Query, ScoredEntry, ScoredList
from .embeddings import MissingConceptsError
from .indexing import IndexEntry, SemanticIndex
from .llm import CallLedger, ParseFailure, TEMPLATES, complete, parse_tagged_list, render_prompt
from .retrievers import zscores

ABLATIONS = ("none", "no_topic", "no_phrase", "no_corpus", "no_llm_class", "no_llm_freq")
FALLBACK_CONCEPT_COUNT = 20

NO_CORPUS_PROMPT = """You will receive a query for research papers and a ranked list of papers returned by a retriever.

Your task is to improve the provided retrieval results by generating a list of scientific topics and terms that can accurately identify the relevant papers of the query.

Make sure your selection is strictly based on the original query and does not contain repeated concepts.

Output format: `<ans>selection 1, selection 2, ...</ans>'.

Retriever result: {d0}

Original Query: {q}"""


@dataclass
class PipelineConfig:
    k: int = 50
    n_prf_docs: int = 20
    rerank_pool: int = 1000
    ablation: str = "none"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.n_prf_docs < 1:
            raise ValueError(f"n_prf_docs must be >= 1, got {self.n_prf_docs}")
        if self.rerank_pool < self.n_prf_docs:
            raise ValueError(f"rerank_pool ({self.rerank_pool}) must be >= n_prf_docs ({self.n_prf_docs})")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")


@dataclass
class CandidateContext:
    """PRF artifacts: top papers and their frequent topics / phrases."""

    docs: list[tuple[str, str]]  # (paper id, title), base order
    topics: list[tuple[str, int]]  # (name, frequency), freq desc then name asc
    phrases: list[tuple[str, int]]
    unindexed_docs: int = 0

    def candidate_names(self) -> set[str]:
        return {name for name, _ in self.topics} | {name for name, _ in self.phrases}

    def by_frequency(self) -> list[tuple[str, int]]:
        """Topics and phrases merged, most frequent first, name-tie ascending.

        A string present in both lists keeps its larger count.
        """
        merged: dict[str, int] = {}
        for name, count in [*self.topics, *self.phrases]:
            merged[name] = max(merged.get(name, 0), count)
        return sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class CoreConcepts:
    """Concept strings selected for the query, tagged by origin."""

    items: list[tuple[str, str]] = field(default_factory=list)  # (concept, "topic"|"phrase")
    llm_violations: int = 0
    used_fallback: bool = False

    def concepts(self) -> list[str]:
        return [c for c, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def collect_candidates(
    base_ranking: ScoredList,
    index: SemanticIndex,
    config: PipelineConfig,
    titles: dict[str, str] | None = None,
) -> CandidateContext:
    """Count concept occurrences over the top pseudo-relevant documents.

    A concept's frequency is the number of top documents whose entry contains
    it. Documents missing from the index contribute nothing (counted).
    """
    titles = titles or {}
    head = base_ranking.entries[: config.n_prf_docs]
    docs = [(e.paper_id, titles.get(e.paper_id, "")) for e in head]
    topic_counts: dict[str, int] = {}
    phrase_counts: dict[str, int] = {}
    unindexed = 0
    for e in head:
        entry = index.get(e.paper_id)
        if entry is None:
            unindexed += 1
            continue
        for t in set(entry.topics):
            topic_counts[t] = topic_counts.get(t, 0) + 1
        for p in set(entry.phrases):
            phrase_counts[p] = phrase_counts.get(p, 0) + 1

    def top_k(counts: dict[str, int]) -> list[tuple[str, int]]:
        return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: config.k]

    topics = [] if config.ablation == "no_topic" else top_k(topic_counts)
    phrases = [] if config.ablation == "no_phrase" else top_k(phrase_counts)
    return CandidateContext(docs=docs, topics=topics, phrases=phrases, unindexed_docs=unindexed)


def _render_docs(docs: list[tuple[str, str]]) -> str:
    return "\n".join(f"{rank}. {title}" for rank, (_, title) in enumerate(docs, start=1))


def _render_counted(items: list[tuple[str, int]]) -> str:
    return ", ".join(f"{name} ({count})" for name, count in items)


def render_core_concepts_prompt(query: Query, context: CandidateContext) -> str:
    return render_prompt(
        TEMPLATES["core_concepts"],
        {
            "d0": _render_docs(context.docs),
            "t0": _render_counted(context.topics),
            "p0": _render_counted(context.phrases),
            "q": query.text,
        },
    )


def render_corpus_free_prompt(query: Query, context: CandidateContext) -> str:
    """Ablation prompt with no candidate lists: the model generates concepts
    from its own knowledge."""
    prompt = NO_CORPUS_PROMPT.replace("{d0}", _render_docs(context.docs))
    return prompt.replace("{q}", query.text)


def _frequency_fallback(context: CandidateContext) -> CoreConcepts:
    topic_names = {name for name, _ in context.topics}
    items = [
        (name, "topic" if name in topic_names else "phrase")
        for name, _ in context.by_frequency()[:FALLBACK_CONCEPT_COUNT]
    ]
    return CoreConcepts(items=items, used_fallback=True)


def identify_core_concepts(
    query: Query,
    context: CandidateContext,
    provider,
    config: PipelineConfig,
    ledger: CallLedger | None = None,
    classifier=None,
    query_vector: np.ndarray | None = None,
) -> CoreConcepts:
    """Select the query's core concepts.

    Default mode makes exactly one LLM call and keeps only selections present
    in the candidate lists; an unparseable or fully-filtered response falls
    back to the most frequent candidates. The no_llm modes make zero calls.
    """
    if config.ablation == "no_llm_freq":
        return _frequency_fallback(context)

    if config.ablation == "no_llm_class":
        if classifier is None or query_vector is None:
            raise ValueError("no_llm_class ablation needs classifier params and a query vector")
        from .classifier import predict_candidates

        ranked = predict_candidates(classifier, query_vector, FALLBACK_CONCEPT_COUNT)
        return CoreConcepts(items=[(t.name, "topic") for t, _ in ranked])

    if config.ablation == "no_corpus":
        prompt = render_corpus_free_prompt(query, context)
    else:
        prompt = render_core_concepts_prompt(query, context)

    try:
        response = complete(provider, prompt, ledger)
        selections = parse_tagged_list(response.text, "ans")
    except ParseFailure:
        return _frequency_fallback(context)

    if config.ablation == "no_corpus":
        # free-form generation is taken verbatim (canonicalized, deduplicated)
        items = [(c, "phrase") for c in selections]
        return CoreConcepts(items=items) if items else _frequency_fallback(context)

    topic_names = {name for name, _ in context.topics}
    phrase_names = {name for name, _ in context.phrases}
    core = CoreConcepts()
    for c in selections:
        if c in topic_names:
            core.items.append((c, "topic"))
        elif c in phrase_names:
            core.items.append((c, "phrase"))
        else:
            core.llm_violations += 1
    if not core.items:
        fallback = _frequency_fallback(context)
        fallback.llm_violations = core.llm_violations
        return fallback
    return core


def semantic_score(core: CoreConcepts, entry: IndexEntry | None, cache) -> float:
    """Averaged max cosine between the query's concepts and the entry's.

    An entry with no concepts scores 0. Must not be called with empty core
    concepts (the pipeline short-circuits to the base ranking instead).
    """
    # the core concepts form a set: stray duplicates must not reweight the mean
    concepts_q = list(dict.fromkeys(core.concepts()))
    if not concepts_q:
        raise ValueError("semantic score is undefined for an empty core concept set")
    concepts_d = entry.concepts() if entry is not None else []
    if not concepts_d:
        return 0.0
    q_mat = cache.matrix_for(concepts_q).astype(np.float64)
    d_mat = cache.matrix_for(concepts_d).astype(np.float64)
    sims = np.clip(q_mat @ d_mat.T, -1.0, 1.0)
    return float(sims.max(axis=1).mean())


def rank_with_concepts(
    base_ranking: ScoredList,
    core: CoreConcepts,
    index: SemanticIndex,
    cache,
    config: PipelineConfig,
) -> ScoredList:
    """Fuse base and semantic scores over the re-ranking pool.

    Documents beyond the pool keep their base order after it. With no core
    concepts the base ranking is returned unchanged; a zero-spread score pool
    contributes all-zero z-scores.
    """
    if not base_ranking.entries:
        return base_ranking
    if len(core) == 0:
        return base_ranking
    pool = base_ranking.entries[: config.rerank_pool]
    tail = base_ranking.entries[config.rerank_pool :]
    s_base = np.array([e.s_base for e in pool], dtype=np.float64)
    s_sem = np.array([semantic_score(core, index.get(e.paper_id), cache) for e in pool])
    fused = zscores(s_base) + zscores(s_sem)
    order = sorted(range(len(pool)), key=lambda i: (-fused[i], pool[i].paper_id))
    entries = [
        ScoredEntry(pool[i].paper_id, float(s_base[i]), float(s_sem[i]), float(fused[i])) for i in order
    ]
    entries.extend(tail)
    return ScoredList(base_ranking.query_id, entries)


class _MergedCache:
    """Read-through view over the shared cache plus per-query extra vectors."""

    def __init__(self, base, extras: dict[str, np.ndarray]):
        self.base = base
        self.extras = extras

    def matrix_for(self, concepts: list[str]) -> np.ndarray:
        rows = []
        missing = []
        for c in concepts:
            if c in self.extras:
                rows.append(self.extras[c])
            elif c in self.base:
                rows.append(self.base.vector(c))
            else:
                missing.append(c)
        if missing:
            raise MissingConceptsError(missing)
        return np.stack(rows)


@dataclass
class PipelineResult:
    query_id: str
    ranking: ScoredList
    base_ranking: ScoredList
    core: CoreConcepts
    context: CandidateContext
    ledger: dict


class Pipeline:
    """End-to-end query processing: retrieve, identify concepts, re-rank.

    One base-retriever call and (in default mode) exactly one LLM call per
    query; the internal ledger is reset at the start of every query.
    """

    def __init__(
        self,
        retriever,
        index: SemanticIndex,
        cache,
        provider,
        config: PipelineConfig | None = None,
        titles: dict[str, str] | None = None,
        classifier=None,
        query_vectors=None,
        embedding_provider=None,
        clock=time.perf_counter,
    ):
        self.retriever = retriever
        self.index = index
        self.cache = cache
        self.provider = provider
        self.config = config or PipelineConfig()
        self.titles = titles or {}
        self.classifier = classifier
        self.query_vectors = query_vectors
        self.embedding_provider = embedding_provider
        self.clock = clock
        self.ledger = CallLedger()

    def run(self, query: Query) -> PipelineResult:
        self.ledger.reset()
        started = self.clock()
        base = self.retriever.search(query, self.config.rerank_pool)
        self.ledger.count_retriever_call()
        if not base.entries:
            self.ledger.add_wall_time(self.clock() - started)
            return PipelineResult(query.id, base, base, CoreConcepts(), CandidateContext([], [], []), self.ledger.snapshot())

        context = collect_candidates(base, self.index, self.config, self.titles)
        query_vector = None
        if self.config.ablation == "no_llm_class":
            if self.query_vectors is None:
                raise ValueError("no_llm_class ablation needs a query-vector provider")
            query_vector = self.query_vectors.query_vector(query)
        core = identify_core_concepts(
            query, context, self.provider, self.config, self.ledger, self.classifier, query_vector
        )
        cache = self._cache_covering(core)
        ranking = rank_with_concepts(base, core, self.index, cache, self.config)
        self.ledger.add_wall_time(self.clock() - started)
        return PipelineResult(query.id, ranking, base, core, context, self.ledger.snapshot())

    def _cache_covering(self, core: CoreConcepts):
        """Embed on the fly any selected concept missing from the shared cache
        (free-form or classifier-chosen concepts may fall outside the index
        vocabulary)."""
        missing = [c for c in core.concepts() if c not in self.cache]
        if not missing:
            return self.cache
        if self.embedding_provider is None:
            raise MissingConceptsError(missing)
        from .embeddings import unit_normalize

        rows = self.embedding_provider.embed(missing)
        extras = {c: unit_normalize(r) for c, r in zip(missing, rows)}
        return _MergedCache(self.cache, extras)
