"""Command-line entrypoint.

Subcommands: synth, train, index, embed-concepts, search, eval, sweep.
Settings come from an optional JSON config file with flag overrides (flags
win); unknown config keys are fatal so misconfigured runs fail fast. Exit
codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to stderr,
data to files or stdout.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import classifier as clf
from .corpus import load_corpus, load_label_space, load_qrels, load_queries, save_run
from .embeddings import ConceptEmbeddingCache, FileEmbeddingProvider, RemoteEmbeddingProvider, load_matrix
from .evaluation import pipeline_with_k, run_eval, sweep_k, sweep_table
from .indexing import DEFAULT_CANDIDATES, SemanticIndex, build_index, concept_vectors
from .llm import HttpChatProvider, MockProvider, ReplayProvider
from .ranking import ABLATIONS, Pipeline, PipelineConfig
from .retrievers import (
    Bm25Index,
    Bm25Retriever,
    DenseIndex,
    DenseRetriever,
    HybridRetriever,
    QueryVectorLookup,
)
from .synthetic import SyntheticSpec, generate, load_world_metadata, make_scripted_rule

DEFAULT_CONFIG: dict = {
    "paths": {
        "corpus": None,
        "labels": None,
        "doc_topics": None,
        "paper_vectors": None,
        "topic_vectors": None,
        "query_vectors": None,
        "concept_vectors": None,
        "index": None,
        "concept_cache": None,
        "queries": None,
        "qrels": None,
        "classifier": None,
        "out_dir": None,
    },
    "retriever": {"kind": "bm25", "k1": 1.2, "b": 0.75, "top_n": 1000, "query_prefix": ""},
    "classifier": {
        "learning_rate": 5e-5,
        "epochs": 10,
        "alpha": 1e-2,
        "batch_size": 32,
        "seed": 0,
        "logit_clamp": 30.0,
        "link": "sigmoid_exp",
        "m": DEFAULT_CANDIDATES,
    },
    "pipeline": {"k": 50, "n_prf_docs": 20, "rerank_pool": 1000, "ablation": "none"},
    "provider": {
        "kind": "replay",
        "base_url": None,
        "model": None,
        "timeout": 60.0,
        "api_key_env": "LLM_API_KEY",
        "replay_store": None,
        "world": None,
    },
    "eval": {"ks": [10, 50, 100], "k_grid": [5, 10, 25, 50, 75, 100]},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the config file; unknown keys are fatal."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return config
    with open(path, encoding="utf-8") as f:
        user = json.load(f)
    if not isinstance(user, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    for section, values in user.items():
        if section not in config:
            raise UsageError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise UsageError(f"config section {section!r} must be an object")
        for key, value in values.items():
            if key not in config[section]:
                raise UsageError(f"unknown config key {section}.{key!r}")
            config[section][key] = value
    return config


def _override(config: dict, section: str, key: str, value) -> None:
    if value is not None:
        config[section][key] = value


def _require_path(config: dict, key: str, flag_hint: str) -> str:
    value = config["paths"].get(key)
    if not value:
        raise UsageError(f"missing required path {key!r} (set paths.{key} or pass {flag_hint})")
    if not Path(value).exists():
        raise FileNotFoundError(f"{key} path does not exist: {value}")
    return value


def _build_provider(config: dict):
    p = config["provider"]
    kind = p["kind"]
    if kind == "http":
        if not p["base_url"] or not p["model"]:
            raise UsageError("http provider needs provider.base_url and provider.model")
        return HttpChatProvider(
            p["base_url"], p["model"], api_key=os.environ.get(p["api_key_env"] or "", ""), timeout=p["timeout"]
        )
    if kind == "replay":
        if not p["replay_store"]:
            raise UsageError("replay provider needs provider.replay_store")
        return ReplayProvider(p["replay_store"])
    if kind == "scripted":
        if not p["world"]:
            raise UsageError("scripted provider needs provider.world (a world.json)")
        return MockProvider(make_scripted_rule(load_world_metadata(p["world"])))
    raise UsageError(f"unknown provider kind {kind!r}")


def _apply_provider_flag(config: dict, spec: str | None) -> None:
    """`--provider http | replay:<store> | scripted:<world.json>`."""
    if spec is None:
        return
    kind, _, arg = spec.partition(":")
    if kind not in ("http", "replay", "scripted"):
        raise UsageError(f"unknown provider spec {spec!r}")
    config["provider"]["kind"] = kind
    if kind == "replay" and arg:
        config["provider"]["replay_store"] = arg
    if kind == "scripted" and arg:
        config["provider"]["world"] = arg


def _build_retriever(config: dict, papers):
    kind = config["retriever"]["kind"]
    if kind not in ("bm25", "dense", "hybrid"):
        raise UsageError(f"retriever kind must be bm25|dense|hybrid, got {kind!r}")
    bm25 = None
    dense = None
    if kind in ("bm25", "hybrid"):
        bm25 = Bm25Retriever(Bm25Index(papers, k1=config["retriever"]["k1"], b=config["retriever"]["b"]))
    if kind in ("dense", "hybrid"):
        matrix = load_matrix(_require_path(config, "paper_vectors", "--paper-vectors"))
        qmatrix = load_matrix(_require_path(config, "query_vectors", "--query-vectors"))
        dense = DenseRetriever(DenseIndex(matrix, [p.id for p in papers]), QueryVectorLookup(qmatrix))
    if kind == "bm25":
        return bm25
    if kind == "dense":
        return dense
    return HybridRetriever(bm25, dense)


def _build_pipeline(config: dict):
    papers = load_corpus(_require_path(config, "corpus", "--corpus"))
    retriever = _build_retriever(config, papers)
    index = SemanticIndex.load(_require_path(config, "index", "--index"))
    cache = ConceptEmbeddingCache.load(_require_path(config, "concept_cache", "--concept-cache"))
    provider = _build_provider(config)
    pcfg = PipelineConfig(**config["pipeline"])
    params = None
    query_vectors = None
    if config["paths"]["classifier"]:
        params = clf.load_checkpoint(config["paths"]["classifier"])
    if config["paths"]["query_vectors"]:
        query_vectors = QueryVectorLookup(load_matrix(config["paths"]["query_vectors"]))
    embedding_provider = None
    if config["paths"]["concept_vectors"]:
        embedding_provider = FileEmbeddingProvider(load_matrix(config["paths"]["concept_vectors"]))
    return Pipeline(
        retriever,
        index,
        cache,
        provider,
        pcfg,
        titles={p.id: p.title for p in papers},
        classifier=params,
        query_vectors=query_vectors,
        embedding_provider=embedding_provider,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_docs=args.docs,
        n_topics=args.topics,
        n_phrases_per_doc=args.phrases_per_doc,
        embedding_dim=args.dim,
        noise_scale=args.noise,
        seed=args.seed,
        n_queries=args.queries,
    )
    world = generate(spec)
    world.write(args.out)
    print(f"wrote synthetic world ({spec.n_docs} docs, {spec.n_topics} topics) to {args.out}", file=sys.stderr)
    return 0


def cmd_train(args, config: dict) -> int:
    _override(config, "paths", "labels", args.label_space)
    _override(config, "paths", "doc_topics", args.labels)
    _override(config, "paths", "paper_vectors", args.embeddings)
    _override(config, "paths", "topic_vectors", args.topic_vectors)
    for key in ("learning_rate", "epochs", "alpha", "batch_size", "seed"):
        _override(config, "classifier", key, getattr(args, key))

    space = load_label_space(_require_path(config, "labels", "--label-space"))
    paper_matrix = load_matrix(_require_path(config, "paper_vectors", "--embeddings"))
    topic_matrix = load_matrix(_require_path(config, "topic_vectors", "--topic-vectors"))
    doc_topics_path = _require_path(config, "doc_topics", "--labels")

    positives: list[set[int]] = []
    doc_ids: list[str] = []
    with open(doc_topics_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            doc_ids.append(str(rec["id"]))
            positives.append({space.index_of(name) for name in rec["topics"]})
    docs = np.stack([paper_matrix.vector(pid) for pid in doc_ids])
    topic_rows = np.stack([topic_matrix.vector(t.name) for t in space])

    c = config["classifier"]
    tcfg = clf.TrainingConfig(
        learning_rate=c["learning_rate"],
        epochs=c["epochs"],
        alpha=c["alpha"],
        batch_size=c["batch_size"],
        seed=c["seed"],
        logit_clamp=c["logit_clamp"],
        link=c["link"],
    )
    corpus = clf.LabeledCorpus(docs, positives, space, topic_rows)
    params, trace = clf.train(corpus, tcfg)
    clf.save_checkpoint(params, args.out)
    for epoch, loss in enumerate(trace, start=1):
        print(f"epoch {epoch}: loss {loss:.6f}", file=sys.stderr)
    print(f"saved classifier checkpoint to {args.out}", file=sys.stderr)
    return 0


def cmd_index(args, config: dict) -> int:
    _override(config, "paths", "corpus", args.corpus)
    _override(config, "paths", "classifier", args.classifier)
    _override(config, "paths", "paper_vectors", args.embeddings)
    _apply_provider_flag(config, args.provider)
    _override(config, "classifier", "m", args.m)

    papers = load_corpus(_require_path(config, "corpus", "--corpus"))
    params = clf.load_checkpoint(_require_path(config, "classifier", "--classifier"))
    matrix = load_matrix(_require_path(config, "paper_vectors", "--embeddings"))
    provider = _build_provider(config)
    index, report = build_index(
        papers,
        params,
        matrix,
        provider,
        m=config["classifier"]["m"],
        index_path=args.out,
        strict_phrases=args.strict_phrases,
    )
    if args.report:
        report.save(args.report)
    print(
        f"indexed {report.papers_indexed} papers ({report.papers_resumed} resumed, "
        f"{report.fallbacks} fallbacks, {report.parse_failures} parse failures)",
        file=sys.stderr,
    )
    return 0


def cmd_embed_concepts(args, config: dict) -> int:
    _override(config, "paths", "index", args.index)
    _override(config, "paths", "concept_vectors", args.vectors)
    index = SemanticIndex.load(_require_path(config, "index", "--index"))
    if args.remote:
        provider = RemoteEmbeddingProvider(args.remote, args.model or "embedding")
    else:
        provider = FileEmbeddingProvider(load_matrix(_require_path(config, "concept_vectors", "--vectors")))
    cache = concept_vectors(index, provider)
    cache.save(args.out)
    print(f"embedded {len(cache)} concepts -> {args.out}", file=sys.stderr)
    return 0


def cmd_search(args, config: dict) -> int:
    _override(config, "paths", "queries", args.query_file)
    _override(config, "retriever", "kind", args.retriever)
    _override(config, "paths", "index", args.index)
    _override(config, "pipeline", "ablation", args.ablation)
    _apply_provider_flag(config, args.provider)

    queries = load_queries(_require_path(config, "queries", "--query-file"))
    pipeline = _build_pipeline(config)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for query in queries:
            result = pipeline.run(query)
            rec = {
                "query_id": query.id,
                "ranking": [
                    {"id": e.paper_id, "s_base": e.s_base, "s_sem": e.s_sem, "s_final": e.s_final}
                    for e in result.ranking.entries[: args.top]
                ],
                "core_concepts": result.core.items,
                "ledger": result.ledger,
            }
            out.write(json.dumps(rec) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _eval_inputs(args, config: dict):
    _override(config, "paths", "queries", args.query_file)
    _override(config, "paths", "qrels", args.qrels)
    _override(config, "retriever", "kind", args.retriever)
    _override(config, "paths", "index", args.index)
    _override(config, "pipeline", "ablation", args.ablation)
    _apply_provider_flag(config, args.provider)
    queries = load_queries(_require_path(config, "queries", "--query-file"))
    qrels = load_qrels(_require_path(config, "qrels", "--qrels"))
    return queries, qrels, _build_pipeline(config)


def cmd_eval(args, config: dict) -> int:
    queries, qrels, pipeline = _eval_inputs(args, config)
    ks = args.ks or config["eval"]["ks"]
    report = run_eval(queries, qrels, pipeline, ks, config_snapshot={"pipeline": config["pipeline"]})
    if args.out:
        report.save(args.out)
    print(report.table())
    return 0


def cmd_sweep(args, config: dict) -> int:
    queries, qrels, pipeline = _eval_inputs(args, config)
    ks = args.ks or config["eval"]["ks"]
    grid = args.k_grid or config["eval"]["k_grid"]
    results = sweep_k(queries, qrels, lambda k: pipeline_with_k(pipeline, k), grid, ks=ks)
    if args.out:
        payload = {str(k): json.loads(rep.to_json()) for k, rep in results}
        Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(sweep_table(results))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--provider", help="http | replay:<store> | scripted:<world.json>")


def build_parser() -> _Parser:
    parser = _Parser(prog="conceptrank", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a seeded synthetic world")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--topics", type=int, default=10)
    p.add_argument("--phrases-per-doc", type=int, default=2)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--queries", type=int, default=None)

    p = sub.add_parser("train", help="train the topic classifier")
    p.add_argument("--config")
    p.add_argument("--labels", help="doc-topic assignments (JSONL id/topics)")
    p.add_argument("--label-space", help="topic label space (id<TAB>name)")
    p.add_argument("--embeddings", help="paper vector manifest")
    p.add_argument("--topic-vectors", help="topic seed vector manifest")
    p.add_argument("--epochs", type=int, dest="epochs")
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--out", required=True, help="checkpoint directory")

    p = sub.add_parser("index", help="build the semantic index")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--classifier", help="checkpoint directory")
    p.add_argument("--embeddings", help="paper vector manifest")
    p.add_argument("--m", type=int, help="candidate topics per paper")
    p.add_argument("--strict-phrases", action="store_true")
    p.add_argument("--out", required=True, help="index JSONL (appended; resumes)")
    p.add_argument("--report", help="write the build report JSON here")

    p = sub.add_parser("embed-concepts", help="embed the index vocabulary")
    p.add_argument("--config")
    p.add_argument("--index")
    p.add_argument("--vectors", help="concept vector manifest (file provider)")
    p.add_argument("--remote", help="base URL of a remote embedding endpoint")
    p.add_argument("--model", help="remote embedding model name")
    p.add_argument("--out", required=True, help="concept cache manifest path")

    p = sub.add_parser("search", help="run queries through the full pipeline")
    _add_common(p)
    p.add_argument("--query-file")
    p.add_argument("--retriever", choices=["bm25", "dense", "hybrid"])
    p.add_argument("--index")
    p.add_argument("--ablation", choices=list(ABLATIONS))
    p.add_argument("--top", type=int, default=100, help="ranked entries per output record")
    p.add_argument("--out", help="output JSONL (default stdout)")

    p = sub.add_parser("eval", help="evaluate recall and efficiency")
    _add_common(p)
    p.add_argument("--query-file")
    p.add_argument("--qrels")
    p.add_argument("--retriever", choices=["bm25", "dense", "hybrid"])
    p.add_argument("--index")
    p.add_argument("--ablation", choices=list(ABLATIONS))
    p.add_argument("--ks", type=int, nargs="+")
    p.add_argument("--out", help="report JSON path")

    p = sub.add_parser("sweep", help="evaluate across candidate-list sizes")
    _add_common(p)
    p.add_argument("--query-file")
    p.add_argument("--qrels")
    p.add_argument("--retriever", choices=["bm25", "dense", "hybrid"])
    p.add_argument("--index")
    p.add_argument("--ablation", choices=list(ABLATIONS))
    p.add_argument("--ks", type=int, nargs="+")
    p.add_argument("--k-grid", type=int, nargs="+")
    p.add_argument("--out", help="per-k report JSON path")

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        if args.command == "synth":
            return cmd_synth(args)
        config = load_config(args.config)
        if args.command == "train":
            return cmd_train(args, config)
        if args.command == "index":
            return cmd_index(args, config)
        if args.command == "embed-concepts":
            return cmd_embed_concepts(args, config)
        if args.command == "search":
            return cmd_search(args, config)
        if args.command == "eval":
            return cmd_eval(args, config)
        if args.command == "sweep":
            return cmd_sweep(args, config)
        parser.print_usage(sys.stderr)
        return 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
