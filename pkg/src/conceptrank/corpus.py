"""Core data types for papers, topics, queries, judgments and ranked lists.

All on-disk formats are line-delimited UTF-8: the corpus is JSONL with
id/title/abstract fields, label spaces and queries are id<TAB>text files,
and qrels are qid<TAB>docid<TAB>rel rows. Every type round-trips through
its save/load pair field-for-field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class CorpusFormatError(ValueError):
    """A record in an input file could not be parsed."""

    def __init__(self, path: str | Path, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class DuplicateIdError(ValueError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate paper id {doc_id!r}")


class DuplicateTopicError(ValueError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate topic name after canonicalization: {name!r}")


class UnknownDocumentError(ValueError):
    def __init__(self, query_id: str, doc_id: str):
        self.query_id = query_id
        self.doc_id = doc_id
        super().__init__(f"qrels for query {query_id!r} reference unknown paper {doc_id!r}")


def canonicalize(text: str) -> str:
    """Canonical surface form: lowercased, trimmed, inner whitespace collapsed.

    Idempotent: canonicalize(canonicalize(x)) == canonicalize(x).
    """
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class Paper:
    id: str
    title: str
    abstract: str

    @property
    def text(self) -> str:
        """The title-then-abstract concatenation used everywhere downstream."""
        return f"{self.title}. {self.abstract}"


@dataclass(frozen=True)
class Topic:
    id: str
    name: str  # canonical form


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"query {self.id!r} has empty text")


class LabelSpace:
    """Ordered collection of topics with a total name-to-index lookup."""

    def __init__(self, topics: list[Topic]):
        self.topics = list(topics)
        self._index_by_name: dict[str, int] = {}
        for i, t in enumerate(self.topics):
            if not t.name:
                raise ValueError(f"topic {t.id!r} has empty name")
            if t.name in self._index_by_name:
                raise DuplicateTopicError(t.name)
            self._index_by_name[t.name] = i

    def __len__(self) -> int:
        return len(self.topics)

    def __iter__(self):
        return iter(self.topics)

    def __contains__(self, name: str) -> bool:
        return name in self._index_by_name

    def index_of(self, name: str) -> int:
        return self._index_by_name[name]

    def names(self) -> list[str]:
        return [t.name for t in self.topics]


@dataclass(frozen=True)
class ScoredEntry:
    paper_id: str
    s_base: float
    s_sem: float | None
    s_final: float


class ScoredList:
    """Ranked list of papers for one query.

    Position is authoritative. `from_scores` sorts strictly by
    (s_final descending, paper id ascending); the plain constructor accepts
    pre-ordered entries (a re-ranked pool followed by its unranked tail keeps
    the tail in base order, so its raw scores are not globally sorted).
    Duplicate paper ids are rejected in both paths.
    """

    def __init__(self, query_id: str, entries: list[ScoredEntry]):
        seen: set[str] = set()
        for e in entries:
            if e.paper_id in seen:
                raise DuplicateIdError(e.paper_id)
            seen.add(e.paper_id)
        self.query_id = query_id
        self.entries = list(entries)

    @classmethod
    def from_scores(
        cls,
        query_id: str,
        base_scores: dict[str, float],
        sem_scores: dict[str, float] | None = None,
        final_scores: dict[str, float] | None = None,
    ) -> "ScoredList":
        """Build a strictly sorted list from unsorted score maps.

        `final_scores` defaults to `base_scores`; `sem_scores` entries are
        optional per paper.
        """
        finals = final_scores if final_scores is not None else base_scores
        sems = sem_scores or {}
        order = sorted(finals, key=lambda pid: (-finals[pid], pid))
        entries = [
            ScoredEntry(pid, float(base_scores.get(pid, 0.0)), _opt(sems.get(pid)), float(finals[pid]))
            for pid in order
        ]
        return cls(query_id, entries)

    def ids(self) -> list[str]:
        return [e.paper_id for e in self.entries]

    def top(self, k: int) -> list[str]:
        return [e.paper_id for e in self.entries[:k]]

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ScoredList)
            and self.query_id == other.query_id
            and self.entries == other.entries
        )


def _opt(x) -> float | None:
    return None if x is None else float(x)


@dataclass
class Qrels:
    """Mapping query-id -> set of relevant paper-ids."""

    relevant: dict[str, set[str]] = field(default_factory=dict)
    dropped_unknown: int = 0  # unknown paper ids dropped in lenient mode

    def for_query(self, query_id: str) -> set[str]:
        return self.relevant.get(query_id, set())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.relevant


# ---------------------------------------------------------------------------
# Loaders / writers
# ---------------------------------------------------------------------------


def load_corpus(path: str | Path) -> list[Paper]:
    """Load a JSONL corpus of id/title/abstract records, in file order."""
    papers: list[Paper] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(path, line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(rec, dict):
                raise CorpusFormatError(path, line_no, "record is not an object")
            for key in ("id", "title", "abstract"):
                if key not in rec:
                    raise CorpusFormatError(path, line_no, f"missing field {key!r}")
            pid = str(rec["id"])
            if not pid:
                raise CorpusFormatError(path, line_no, "empty paper id")
            if pid in seen:
                raise DuplicateIdError(pid)
            title, abstract = str(rec["title"]), str(rec["abstract"])
            if not (title + abstract):
                raise CorpusFormatError(path, line_no, f"paper {pid!r} has no text")
            seen.add(pid)
            papers.append(Paper(pid, title, abstract))
    return papers


def save_corpus(papers: list[Paper], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in papers:
            f.write(json.dumps({"id": p.id, "title": p.title, "abstract": p.abstract}) + "\n")


def load_label_space(path: str | Path) -> LabelSpace:
    """Load an id<TAB>name label space; names are canonicalized."""
    topics: list[Topic] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusFormatError(path, line_no, f"expected id<TAB>name, got {len(parts)} fields")
            tid, name = parts[0].strip(), canonicalize(parts[1])
            if not name:
                raise CorpusFormatError(path, line_no, f"topic {tid!r} has empty name")
            topics.append(Topic(tid, name))
    if not topics:
        raise ValueError(f"label space file {path} is empty")
    return LabelSpace(topics)


def save_label_space(space: LabelSpace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in space:
            f.write(f"{t.id}\t{t.name}\n")


def load_queries(path: str | Path) -> list[Query]:
    """Load an id<TAB>text query file, in file order."""
    queries: list[Query] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2 or not parts[1].strip():
                raise CorpusFormatError(path, line_no, "expected qid<TAB>text")
            queries.append(Query(parts[0].strip(), parts[1].strip()))
    return queries


def save_queries(queries: list[Query], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q in queries:
            f.write(f"{q.id}\t{q.text}\n")


def load_qrels(
    path: str | Path,
    known_ids: set[str] | None = None,
    lenient: bool = False,
) -> Qrels:
    """Load qid<TAB>docid<TAB>rel judgments, keeping only rel > 0 rows.

    With `known_ids` given, rows naming unknown papers raise in strict mode
    and are dropped (counted) in lenient mode.
    """
    qrels = Qrels()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusFormatError(path, line_no, f"expected 3 tab-separated fields, got {len(parts)}")
            qid, did, rel_str = (p.strip() for p in parts)
            try:
                rel = int(rel_str)
            except ValueError as exc:
                raise CorpusFormatError(path, line_no, f"relevance {rel_str!r} is not an integer") from exc
            if rel < 0:
                raise CorpusFormatError(path, line_no, f"negative relevance {rel}")
            if rel == 0:
                continue
            if known_ids is not None and did not in known_ids:
                if not lenient:
                    raise UnknownDocumentError(qid, did)
                qrels.dropped_unknown += 1
                continue
            qrels.relevant.setdefault(qid, set()).add(did)
    return qrels


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(qrels.relevant):
            for did in sorted(qrels.relevant[qid]):
                f.write(f"{qid}\t{did}\t1\n")


def load_run(path: str | Path) -> list[ScoredList]:
    """Load ranked lists saved by save_run (one query per JSONL line)."""
    runs: list[ScoredList] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entries = [
                ScoredEntry(str(pid), float(sb), _opt(ss), float(sf))
                for pid, sb, ss, sf in rec["entries"]
            ]
            runs.append(ScoredList(str(rec["query_id"]), entries))
    return runs


def save_run(runs: list[ScoredList], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in runs:
            rec = {
                "query_id": r.query_id,
                "entries": [[e.paper_id, e.s_base, e.s_sem, e.s_final] for e in r.entries],
            }
            f.write(json.dumps(rec) + "\n")
