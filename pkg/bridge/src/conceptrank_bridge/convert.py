"""Convert public dataset dumps into the engine's corpus/queries/qrels files.

Supported dumps:
  litsearch  — corpus_clean.jsonl (corpusid/title/abstract) plus a query file
               of {query, corpusids} records.
  csfcube,
  dorismae   — processed releases with a papers JSONL (id/title/abstract under
               common key variants) and a queries JSONL carrying per-query
               relevant document lists.
  maple      — paper-to-topic label records; emits the label space plus
               per-paper positive topic files for classifier training.

Field names outside the documented variants fail loudly with the offending
field, so silent schema drift cannot produce a half-converted dataset.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

DATASETS = ("litsearch", "csfcube", "dorismae", "maple")


class SchemaDriftError(ValueError):
    def __init__(self, path: str | Path, line_no: int, field: str, keys):
        self.field = field
        super().__init__(
            f"{path}:{line_no}: expected field {field!r}, record has keys {sorted(keys)}"
        )


def _jsonl(path: Path):
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if line:
                yield line_no, json.loads(line)


def _pick(record: dict, candidates: tuple[str, ...], path: Path, line_no: int):
    for key in candidates:
        if key in record:
            return record[key]
    raise SchemaDriftError(path, line_no, candidates[0], record.keys())


def _find_file(in_dir: Path, names: tuple[str, ...]) -> Path:
    for name in names:
        candidate = in_dir / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"none of {names} found under {in_dir}")


def _canon(text: str) -> str:
    return " ".join(text.lower().split())


def _write_corpus(records, out_dir: Path) -> int:
    count = 0
    with open(out_dir / "corpus.jsonl", "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
            count += 1
    return count


def _write_queries_qrels(queries, qrels, out_dir: Path) -> tuple[int, int]:
    with open(out_dir / "queries.tsv", "w", encoding="utf-8") as f:
        for qid, text in queries:
            f.write(f"{qid}\t{text}\n")
    rows = 0
    with open(out_dir / "qrels.tsv", "w", encoding="utf-8") as f:
        for qid, doc_ids in qrels:
            for did in doc_ids:
                f.write(f"{qid}\t{did}\t1\n")
                rows += 1
    return len(queries), rows


def _convert_litsearch(in_dir: Path, out_dir: Path) -> dict:
    corpus_path = _find_file(in_dir, ("corpus_clean.jsonl", "corpus.jsonl"))
    query_path = _find_file(in_dir, ("query_set.jsonl", "queries.jsonl", "query.jsonl"))

    def corpus_records():
        for line_no, rec in _jsonl(corpus_path):
            pid = _pick(rec, ("corpusid", "id"), corpus_path, line_no)
            title = _pick(rec, ("title",), corpus_path, line_no)
            abstract = _pick(rec, ("abstract",), corpus_path, line_no)
            yield {"id": str(pid), "title": str(title or ""), "abstract": str(abstract or "")}

    n_corpus = _write_corpus(corpus_records(), out_dir)
    queries, qrels = [], []
    for i, (line_no, rec) in enumerate(_jsonl(query_path)):
        text = _pick(rec, ("query", "text"), query_path, line_no)
        relevant = _pick(rec, ("corpusids", "relevant"), query_path, line_no)
        qid = f"q{i:04d}"
        queries.append((qid, str(text)))
        qrels.append((qid, [str(d) for d in relevant]))
    n_queries, n_qrels = _write_queries_qrels(queries, qrels, out_dir)
    return {"corpus": n_corpus, "queries": n_queries, "qrels": n_qrels}


def _convert_processed(in_dir: Path, out_dir: Path) -> dict:
    corpus_path = _find_file(in_dir, ("corpus.jsonl", "papers.jsonl", "documents.jsonl"))
    query_path = _find_file(in_dir, ("queries.jsonl", "test_queries.jsonl", "test.jsonl"))

    def corpus_records():
        for line_no, rec in _jsonl(corpus_path):
            pid = _pick(rec, ("id", "paper_id", "pid", "corpusid"), corpus_path, line_no)
            title = _pick(rec, ("title",), corpus_path, line_no)
            abstract = _pick(rec, ("abstract", "text"), corpus_path, line_no)
            yield {"id": str(pid), "title": str(title or ""), "abstract": str(abstract or "")}

    n_corpus = _write_corpus(corpus_records(), out_dir)
    queries, qrels = [], []
    for i, (line_no, rec) in enumerate(_jsonl(query_path)):
        qid = rec.get("id") or rec.get("qid") or rec.get("query_id") or f"q{i:04d}"
        text = _pick(rec, ("query", "text", "question"), query_path, line_no)
        relevant = _pick(rec, ("relevant", "relevant_docs", "corpusids", "docs"), query_path, line_no)
        queries.append((str(qid), str(text)))
        qrels.append((str(qid), [str(d) for d in relevant]))
    n_queries, n_qrels = _write_queries_qrels(queries, qrels, out_dir)
    return {"corpus": n_corpus, "queries": n_queries, "qrels": n_qrels}


def _convert_maple(in_dir: Path, out_dir: Path) -> dict:
    labels_path = _find_file(in_dir, ("labels.jsonl", "paper_labels.jsonl", "maple.jsonl"))
    names: dict[str, str] = {}  # canonical name -> topic id
    doc_rows = []
    for line_no, rec in _jsonl(labels_path):
        pid = _pick(rec, ("paper", "id", "paper_id"), labels_path, line_no)
        raw_labels = _pick(rec, ("label", "labels", "topics"), labels_path, line_no)
        canon = []
        for name in raw_labels:
            c = _canon(str(name))
            if not c:
                continue
            if c not in names:
                names[c] = f"t{len(names):05d}"
            canon.append(c)
        doc_rows.append({"id": str(pid), "topics": sorted(set(canon))})
    with open(out_dir / "labels.tsv", "w", encoding="utf-8") as f:
        for name in sorted(names):
            f.write(f"{names[name]}\t{name}\n")
    with open(out_dir / "doc_topics.jsonl", "w", encoding="utf-8") as f:
        for row in doc_rows:
            f.write(json.dumps(row) + "\n")
    return {"topics": len(names), "papers": len(doc_rows)}


def convert_dataset(name: str, in_dir: str | Path, out_dir: str | Path) -> dict:
    """Convert one official dump; returns the emitted record counts."""
    if name not in DATASETS:
        raise ValueError(f"unknown dataset {name!r}, expected one of {DATASETS}")
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if name == "litsearch":
        counts = _convert_litsearch(in_dir, out_dir)
    elif name in ("csfcube", "dorismae"):
        counts = _convert_processed(in_dir, out_dir)
    else:
        counts = _convert_maple(in_dir, out_dir)
    print(f"{name}: " + ", ".join(f"{k}={v}" for k, v in counts.items()), file=sys.stderr)
    return counts
