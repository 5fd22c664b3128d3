"""Offline semantic index: per-paper topics and key phrases.

For each paper the classifier proposes candidate topics, one LLM call selects
the fitting ones and extracts key phrases, and the validated result becomes
the paper's index entry. Topics outside the candidate list are dropped and
counted; phrases must be grounded in the paper text (strict: canonical
substring; lenient: every phrase token occurs in the text). Entries are
persisted incrementally so an interrupted build resumes where it stopped.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import ClassifierParams, predict_candidates
from .corpus import Paper, Topic, canonicalize
from .embeddings import ConceptEmbeddingCache, embed_concepts
from .llm import (
    CallLedger,
    ParseFailure,
    TEMPLATES,
    complete,
    parse_tagged_list,
    render_prompt,
)
from .retrievers import tokenize

MAX_TOPICS_PER_ENTRY = 10
MAX_PHRASES_PER_ENTRY = 20
FALLBACK_TOPIC_COUNT = 3
DEFAULT_CANDIDATES = 15


@dataclass(frozen=True)
class IndexEntry:
    paper_id: str
    topics: tuple[str, ...]
    phrases: tuple[str, ...]

    def concepts(self) -> list[str]:
        """Topic and phrase strings, deduplicated, topics first."""
        seen: set[str] = set()
        out: list[str] = []
        for c in (*self.topics, *self.phrases):
            if c not in seen:
                seen.add(c)
                out.append(c)
        return out


@dataclass
class BuildReport:
    papers_total: int = 0
    papers_indexed: int = 0
    papers_resumed: int = 0
    topic_violations: int = 0
    phrase_drops: int = 0
    parse_failures: int = 0
    fallbacks: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)


class SemanticIndex:
    """Paper-id -> IndexEntry plus the corpus-wide concept vocabulary."""

    def __init__(self, entries: list[IndexEntry] | None = None):
        self.entries: dict[str, IndexEntry] = {}
        self._df: dict[str, int] = {}
        for e in entries or []:
            self.add(e)

    def add(self, entry: IndexEntry) -> None:
        if entry.paper_id in self.entries:
            raise ValueError(f"index already has an entry for paper {entry.paper_id!r}")
        self.entries[entry.paper_id] = entry
        for concept in set(entry.concepts()):
            self._df[concept] = self._df.get(concept, 0) + 1

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.entries

    def entry(self, paper_id: str) -> IndexEntry:
        return self.entries[paper_id]

    def get(self, paper_id: str) -> IndexEntry | None:
        return self.entries.get(paper_id)

    def document_frequencies(self) -> dict[str, int]:
        return dict(self._df)

    def recount_frequencies(self) -> dict[str, int]:
        """Brute-force recount over entries; must equal the stored counts."""
        df: dict[str, int] = {}
        for e in self.entries.values():
            for concept in set(e.concepts()):
                df[concept] = df.get(concept, 0) + 1
        return df

    def vocabulary(self) -> list[str]:
        return sorted(self._df)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for pid in self.entries:  # insertion order
                e = self.entries[pid]
                f.write(json.dumps({"id": pid, "topics": list(e.topics), "phrases": list(e.phrases)}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SemanticIndex":
        index = cls()
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                index.add(IndexEntry(str(rec["id"]), tuple(rec["topics"]), tuple(rec["phrases"])))
        return index


def phrase_is_grounded(phrase: str, paper_text: str, strict: bool) -> bool:
    """Whether an extracted phrase is supported by the paper text."""
    if strict:
        return canonicalize(phrase) in canonicalize(paper_text)
    phrase_tokens = tokenize(phrase)
    if not phrase_tokens:
        return False
    text_tokens = set(tokenize(paper_text))
    return all(t in text_tokens for t in phrase_tokens)


def render_index_prompt(paper: Paper, candidate_names: list[str]) -> str:
    body = f"{paper.text}\n\nCandidate topics: {', '.join(candidate_names)}"
    return render_prompt(TEMPLATES["index_build"], {"d": body})


@dataclass
class _EntryStats:
    topic_violations: int = 0
    phrase_drops: int = 0
    parse_failure: bool = False
    fallback: bool = False


def build_entry(
    paper: Paper,
    candidates: list[tuple[Topic, float]],
    provider,
    ledger: CallLedger | None = None,
    strict_phrases: bool = False,
) -> tuple[IndexEntry, _EntryStats]:
    """One LLM call turning classifier candidates into a validated entry.

    A parse failure, or a topic list that is empty after validation, falls
    back to the top candidates so every paper stays indexed.
    """
    if not candidates:
        raise ValueError(f"no candidate topics for paper {paper.id!r}")
    names = [t.name for t, _ in candidates]
    stats = _EntryStats()
    prompt = render_index_prompt(paper, names)
    response = complete(provider, prompt, ledger)
    try:
        raw_topics = parse_tagged_list(response.text, "top")
        raw_phrases = parse_tagged_list(response.text, "kp")
    except ParseFailure:
        stats.parse_failure = True
        stats.fallback = True
        return IndexEntry(paper.id, tuple(names[:FALLBACK_TOPIC_COUNT]), ()), stats

    allowed = set(names)
    topics = []
    for t in raw_topics:
        if t in allowed:
            topics.append(t)
        else:
            stats.topic_violations += 1
    if not topics:
        stats.fallback = True
        topics = names[:FALLBACK_TOPIC_COUNT]

    phrases = []
    for p in raw_phrases:
        if phrase_is_grounded(p, paper.text, strict_phrases):
            phrases.append(p)
        else:
            stats.phrase_drops += 1

    return (
        IndexEntry(paper.id, tuple(topics[:MAX_TOPICS_PER_ENTRY]), tuple(phrases[:MAX_PHRASES_PER_ENTRY])),
        stats,
    )


def build_index(
    corpus: list[Paper],
    classifier: ClassifierParams,
    paper_vectors,
    provider,
    m: int = DEFAULT_CANDIDATES,
    index_path: str | Path | None = None,
    ledger: CallLedger | None = None,
    strict_phrases: bool = False,
    max_in_flight: int = 8,
) -> tuple[SemanticIndex, BuildReport]:
    """Index every paper with one LLM call each, resumable via `index_path`.

    Entries are appended in corpus order, so a cold build and a resumed build
    produce byte-identical index files under a deterministic provider.
    """
    if not corpus:
        raise ValueError("cannot index an empty corpus")
    report = BuildReport(papers_total=len(corpus))

    index = SemanticIndex()
    if index_path is not None and Path(index_path).exists():
        index = SemanticIndex.load(index_path)
        report.papers_resumed = len(index)
    todo = [p for p in corpus if p.id not in index]

    def task(paper: Paper):
        candidates = predict_candidates(classifier, paper_vectors.vector(paper.id), m)
        return build_entry(paper, candidates, provider, ledger, strict_phrases)

    out = open(index_path, "a", encoding="utf-8") if index_path is not None else None
    try:
        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
            futures = [(p, pool.submit(task, p)) for p in todo]
            for paper, fut in futures:
                entry, stats = fut.result()
                index.add(entry)
                report.papers_indexed += 1
                report.topic_violations += stats.topic_violations
                report.phrase_drops += stats.phrase_drops
                report.parse_failures += int(stats.parse_failure)
                report.fallbacks += int(stats.fallback)
                if out is not None:
                    out.write(
                        json.dumps({"id": entry.paper_id, "topics": list(entry.topics), "phrases": list(entry.phrases)})
                        + "\n"
                    )
                    out.flush()
    finally:
        if out is not None:
            out.close()
    return index, report


def concept_vectors(index: SemanticIndex, provider) -> ConceptEmbeddingCache:
    """Embed every distinct concept in the index vocabulary once."""
    return embed_concepts(index.vocabulary(), provider)
