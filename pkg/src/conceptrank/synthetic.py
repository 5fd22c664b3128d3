"""Seeded synthetic corpora with planted concept structure.

Every document belongs to one planted topic: its embedding is the topic
centroid plus isotropic noise, its abstract literally mentions the topic name
and its planted phrases, and the gold index entry records exactly those
concepts. Queries target one topic each, with all of that topic's documents
relevant. A scripted rule plays the role of an ideal LLM, answering both
prompt kinds with the planted concepts, so end-to-end behaviour is asserted
independent of any real model.

Randomness comes from numpy's default_rng (PCG64), drawn in a fixed order,
so a (spec, seed) pair generates the same world on any platform.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .classifier import LabeledCorpus
from .corpus import (
    LabelSpace,
    Paper,
    Qrels,
    Query,
    Topic,
    save_corpus,
    save_label_space,
    save_qrels,
    save_queries,
)
from .embeddings import EmbeddingMatrix, save_matrix
from .indexing import IndexEntry, SemanticIndex

PHRASE_JITTER = 0.1


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 200
    n_topics: int = 10
    n_phrases_per_doc: int = 2
    embedding_dim: int = 32
    noise_scale: float = 0.3
    seed: int = 0
    n_queries: int | None = None  # defaults to n_topics

    def __post_init__(self):
        for name in ("n_docs", "n_topics", "n_phrases_per_doc", "embedding_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.n_queries is not None and self.n_queries < 1:
            raise ValueError("n_queries must be >= 1")


@dataclass
class SyntheticWorld:
    spec: SyntheticSpec
    papers: list[Paper]
    label_space: LabelSpace
    gold_entries: list[IndexEntry]
    queries: list[Query]
    qrels: Qrels
    paper_matrix: EmbeddingMatrix
    topic_matrix: EmbeddingMatrix  # ids are topic names
    query_matrix: EmbeddingMatrix
    concept_matrix: EmbeddingMatrix  # every topic name and every pool phrase
    doc_topic: dict[str, int]
    query_topic: dict[str, int]
    topic_phrase_pools: list[list[str]]

    def gold_index(self) -> SemanticIndex:
        return SemanticIndex(self.gold_entries)

    def labeled_corpus(self) -> LabeledCorpus:
        positives = [{self.doc_topic[p.id]} for p in self.papers]
        docs = np.stack([self.paper_matrix.vector(p.id) for p in self.papers])
        return LabeledCorpus(docs, positives, self.label_space, self.topic_matrix.data)

    def titles(self) -> dict[str, str]:
        return {p.id: p.title for p in self.papers}

    def scripted_rule(self):
        return make_scripted_rule(self.metadata())

    def metadata(self) -> dict:
        return {
            "topic_names": self.label_space.names(),
            "topic_phrase_pools": self.topic_phrase_pools,
            "doc_topic": self.doc_topic,
            "doc_phrases": {e.paper_id: list(e.phrases) for e in self.gold_entries},
            "doc_topics": {e.paper_id: list(e.topics) for e in self.gold_entries},
            "query_topic": self.query_topic,
        }

    def write(self, out_dir: str | Path) -> None:
        """Emit the world in every standard on-disk format."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_corpus(self.papers, out / "corpus.jsonl")
        save_label_space(self.label_space, out / "labels.tsv")
        save_queries(self.queries, out / "queries.tsv")
        save_qrels(self.qrels, out / "qrels.tsv")
        self.gold_index().save(out / "gold_index.jsonl")
        save_matrix(self.paper_matrix, out / "paper_vectors.json")
        save_matrix(self.topic_matrix, out / "topic_vectors.json")
        save_matrix(self.query_matrix, out / "query_vectors.json")
        save_matrix(self.concept_matrix, out / "concept_vectors.json")
        with open(out / "doc_topics.jsonl", "w", encoding="utf-8") as f:
            for p in self.papers:
                topic = self.label_space.topics[self.doc_topic[p.id]].name
                f.write(json.dumps({"id": p.id, "topics": [topic]}) + "\n")
        with open(out / "world.json", "w", encoding="utf-8") as f:
            json.dump({"spec": asdict(self.spec), **self.metadata()}, f, indent=2, sort_keys=True)


def _topic_name(i: int) -> str:
    return f"field{i:03d} studies"


def _phrase_name(topic: int, j: int) -> str:
    return f"field{topic:03d} method{j:02d}"


def generate(spec: SyntheticSpec) -> SyntheticWorld:
    """Build a fully deterministic world for the given spec."""
    rng = np.random.default_rng(spec.seed)
    dim = spec.embedding_dim
    n_queries = spec.n_queries if spec.n_queries is not None else spec.n_topics

    centroids = rng.standard_normal((spec.n_topics, dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    topics = [Topic(f"t{i:03d}", _topic_name(i)) for i in range(spec.n_topics)]
    label_space = LabelSpace(topics)

    pool_size = spec.n_phrases_per_doc + 3
    topic_phrase_pools = [
        [_phrase_name(i, j) for j in range(pool_size)] for i in range(spec.n_topics)
    ]
    phrase_vectors = {}
    for i in range(spec.n_topics):
        for phrase in topic_phrase_pools[i]:
            jitter = rng.standard_normal(dim) / np.sqrt(dim)
            phrase_vectors[phrase] = centroids[i] + PHRASE_JITTER * jitter

    papers: list[Paper] = []
    gold_entries: list[IndexEntry] = []
    doc_topic: dict[str, int] = {}
    doc_rows = np.zeros((spec.n_docs, dim))
    for d in range(spec.n_docs):
        topic_idx = d % spec.n_topics
        pid = f"d{d:04d}"
        doc_topic[pid] = topic_idx
        noise = rng.standard_normal(dim) / np.sqrt(dim)
        doc_rows[d] = centroids[topic_idx] + spec.noise_scale * noise
        pool = topic_phrase_pools[topic_idx]
        chosen = rng.choice(len(pool), size=min(spec.n_phrases_per_doc, len(pool)), replace=False)
        phrases = [pool[int(c)] for c in sorted(chosen)]
        name = _topic_name(topic_idx)
        title = f"Advances in {name} [{pid}]"
        abstract = (
            f"We study {name} and introduce {', '.join(phrases)}. "
            f"Experiments on {name} benchmarks show consistent gains."
        )
        papers.append(Paper(pid, title, abstract))
        gold_entries.append(IndexEntry(pid, (name,), tuple(phrases)))

    queries: list[Query] = []
    qrels = Qrels()
    query_topic: dict[str, int] = {}
    query_rows = np.zeros((n_queries, dim))
    docs_by_topic: dict[int, set[str]] = {}
    for pid, t in doc_topic.items():
        docs_by_topic.setdefault(t, set()).add(pid)
    for qi in range(n_queries):
        topic_idx = qi % spec.n_topics
        qid = f"q{qi:04d}"
        query_topic[qid] = topic_idx
        noise = rng.standard_normal(dim) / np.sqrt(dim)
        query_rows[qi] = centroids[topic_idx] + spec.noise_scale * noise
        queries.append(Query(qid, f"{_topic_name(topic_idx)} papers"))
        qrels.relevant[qid] = set(docs_by_topic.get(topic_idx, set()))

    concept_ids = [t.name for t in topics] + [p for pool in topic_phrase_pools for p in pool]
    concept_rows = np.vstack([centroids] + [phrase_vectors[p][None, :] for pool in topic_phrase_pools for p in pool])

    return SyntheticWorld(
        spec=spec,
        papers=papers,
        label_space=label_space,
        gold_entries=gold_entries,
        queries=queries,
        qrels=qrels,
        paper_matrix=EmbeddingMatrix([p.id for p in papers], doc_rows.astype(np.float32)),
        topic_matrix=EmbeddingMatrix([t.name for t in topics], centroids.astype(np.float32)),
        query_matrix=EmbeddingMatrix([q.id for q in queries], query_rows.astype(np.float32)),
        concept_matrix=EmbeddingMatrix(concept_ids, concept_rows.astype(np.float32)),
        doc_topic=doc_topic,
        query_topic=query_topic,
        topic_phrase_pools=topic_phrase_pools,
    )


_DOC_ID_RE = re.compile(r"\[([a-z0-9]+)\]")


def make_scripted_rule(meta: dict):
    """Ideal concept identifier over a world's planted structure.

    For an index prompt it answers with the paper's planted topic and phrases;
    for a query prompt it answers with the query topic's planted concepts,
    restricted to the offered candidates when candidate lists are present.
    """
    topic_names: list[str] = meta["topic_names"]
    pools: list[list[str]] = meta["topic_phrase_pools"]
    doc_phrases: dict[str, list[str]] = meta["doc_phrases"]
    doc_topics: dict[str, list[str]] = meta["doc_topics"]
    token_to_topic = {name.split()[0]: i for i, name in enumerate(topic_names)}

    def topic_of(text: str) -> int | None:
        for token, idx in token_to_topic.items():
            if token in text:
                return idx
        return None

    def rule(prompt: str) -> str:
        if "Original Query:" in prompt:
            tail = prompt.rsplit("Original Query:", 1)[1]
            idx = topic_of(tail)
            if idx is None:
                return "<ans></ans>"
            planted = [topic_names[idx]] + pools[idx]
            if "Candidate topics:" in prompt:
                middle = prompt.split("Candidate topics:", 1)[1].rsplit("Original Query:", 1)[0]
                planted = [c for c in planted if f"{c} (" in middle]
            return f"<ans>{', '.join(planted)}</ans>"
        if "Paper:" in prompt:
            text = prompt.rsplit("Paper:", 1)[1]
            match = _DOC_ID_RE.search(text)
            if match is None or match.group(1) not in doc_topics:
                return "<top></top><kp></kp>"
            pid = match.group(1)
            return f"<top>{', '.join(doc_topics[pid])}</top><kp>{', '.join(doc_phrases[pid])}</kp>"
        return "<ans></ans>"

    return rule


def load_world_metadata(world_json: str | Path) -> dict:
    with open(world_json, encoding="utf-8") as f:
        return json.load(f)
