"""Recall@K evaluation, efficiency accounting, and the candidate-size sweep.

Recall is macro-averaged: every evaluated query weighs equally. Efficiency
aggregates (base-retriever calls, LLM calls, generated tokens, wall time per
query) come from the pipeline's per-query ledger snapshots; wall time spans
the full pipeline call and excludes index and embedding loading.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import Qrels, Query, ScoredList


def recall_at_k(ranking: ScoredList, relevant: set[str], k: int) -> float:
    """|top-k intersection relevant| / |relevant|."""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    if not relevant:
        raise ValueError("recall is undefined for an empty relevant set")
    return len(set(ranking.top(k)) & relevant) / len(relevant)


@dataclass
class EvalReport:
    ks: list[int]
    recall: dict[int, float]
    per_query: dict[str, dict]
    skipped_queries: int
    mean_retriever_calls: float
    mean_llm_calls: float
    mean_completion_tokens: float
    mean_wall_time_s: float
    median_wall_time_s: float
    config: dict = field(default_factory=dict)

    @property
    def n_evaluated(self) -> int:
        return len(self.per_query)

    def recompute_recall(self) -> dict[int, float]:
        """Macro-average recomputed from the per-query records."""
        out = {}
        for k in self.ks:
            vals = [rec["recall"][k] for rec in self.per_query.values()]
            out[k] = sum(vals) / len(vals) if vals else 0.0
        return out

    def to_json(self) -> str:
        payload = {
            "ks": self.ks,
            "recall": {str(k): v for k, v in self.recall.items()},
            "per_query": {
                qid: {**rec, "recall": {str(k): v for k, v in rec["recall"].items()}}
                for qid, rec in self.per_query.items()
            },
            "skipped_queries": self.skipped_queries,
            "n_evaluated": self.n_evaluated,
            "mean_retriever_calls": self.mean_retriever_calls,
            "mean_llm_calls": self.mean_llm_calls,
            "mean_completion_tokens": self.mean_completion_tokens,
            "mean_wall_time_s": self.mean_wall_time_s,
            "median_wall_time_s": self.median_wall_time_s,
            "config": self.config,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    def table(self) -> str:
        """Aligned summary row: recall columns plus efficiency columns."""
        headers = [f"R@{k}" for k in self.ks] + ["#RET", "#LLM", "LLM Output Len", "Running Time"]
        values = [f"{self.recall[k]:.4f}" for k in self.ks] + [
            f"{self.mean_retriever_calls:.2f}",
            f"{self.mean_llm_calls:.2f}",
            f"{self.mean_completion_tokens:.1f}",
            f"{self.mean_wall_time_s:.4f}s",
        ]
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
        return head + "\n" + row


def run_eval(
    queries: list[Query],
    qrels: Qrels,
    pipeline,
    ks: list[int],
    config_snapshot: dict | None = None,
) -> EvalReport:
    """Evaluate every query with relevance judgments; skip and count the rest."""
    if not ks or any(k < 1 for k in ks):
        raise ValueError(f"invalid K list: {ks}")
    ks = sorted(ks)
    per_query: dict[str, dict] = {}
    skipped = 0
    for query in queries:
        relevant = qrels.for_query(query.id)
        if not relevant:
            skipped += 1
            continue
        result = pipeline.run(query)
        per_query[query.id] = {
            "recall": {k: recall_at_k(result.ranking, relevant, k) for k in ks},
            **result.ledger,
        }

    n = len(per_query)

    def mean_of(key: str) -> float:
        return sum(rec[key] for rec in per_query.values()) / n if n else 0.0

    wall_times = [rec["wall_time_s"] for rec in per_query.values()]
    report = EvalReport(
        ks=ks,
        recall={},
        per_query=per_query,
        skipped_queries=skipped,
        mean_retriever_calls=mean_of("retriever_calls"),
        mean_llm_calls=mean_of("llm_calls"),
        mean_completion_tokens=mean_of("completion_tokens"),
        mean_wall_time_s=mean_of("wall_time_s"),
        median_wall_time_s=statistics.median(wall_times) if wall_times else 0.0,
        config=config_snapshot or {},
    )
    report.recall = report.recompute_recall()
    return report


def sweep_k(
    queries: list[Query],
    qrels: Qrels,
    pipeline,
    k_values: list[int] | None = None,
    ks: list[int] | None = None,
) -> list[tuple[int, EvalReport]]:
    """One full evaluation per candidate-list size, ascending.

    `pipeline` is either a factory callable (k -> pipeline) or a Pipeline,
    which is then cloned with each grid value.
    """
    k_values = sorted(k_values or [5, 10, 25, 50, 75, 100])
    if not k_values:
        raise ValueError("k_values must be non-empty")
    ks = ks or [10]
    base = pipeline
    factory = base if callable(base) else (lambda k: pipeline_with_k(base, k))
    out = []
    for k in k_values:
        configured = factory(k)
        snapshot = {"candidate_k": k}
        if getattr(configured, "config", None) is not None:
            snapshot.update(vars(configured.config))
        out.append((k, run_eval(queries, qrels, configured, ks, config_snapshot=snapshot)))
    return out


def sweep_table(results: list[tuple[int, EvalReport]]) -> str:
    """Rows of (k, recall columns) for a sweep result."""
    if not results:
        return ""
    ks = results[0][1].ks
    headers = ["k"] + [f"R@{k}" for k in ks]
    rows = [[str(k)] + [f"{rep.recall[kk]:.4f}" for kk in ks] for k, rep in results]
    widths = [max(len(headers[c]), *(len(r[c]) for r in rows)) for c in range(len(headers))]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for r in rows:
        lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def pipeline_with_k(pipeline, k: int):
    """Clone a Pipeline, replacing only the candidate-list size."""
    from .ranking import Pipeline

    clone = Pipeline(
        retriever=pipeline.retriever,
        index=pipeline.index,
        cache=pipeline.cache,
        provider=pipeline.provider,
        config=replace(pipeline.config, k=k),
        titles=pipeline.titles,
        classifier=pipeline.classifier,
        query_vectors=pipeline.query_vectors,
        embedding_provider=pipeline.embedding_provider,
        clock=pipeline.clock,
    )
    return clone
