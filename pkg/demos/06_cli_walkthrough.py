"""The whole toolchain through the CLI, offline: generate a world, train the
classifier, build the index with the scripted provider, embed the vocabulary,
evaluate, sweep. Every step is a plain `conceptrank <subcommand>` invocation.
"""

import json
import tempfile
from pathlib import Path

from conceptrank.cli import dispatch

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    world, ckpt, index, cache = root / "world", root / "classifier", root / "index.jsonl", root / "cache.json"

    steps = [
        ["synth", "--seed", "0", "--out", str(world), "--docs", "60", "--topics", "6",
         "--dim", "16", "--noise", "0.5", "--queries", "12"],
        ["train",
         "--labels", str(world / "doc_topics.jsonl"),
         "--label-space", str(world / "labels.tsv"),
         "--embeddings", str(world / "paper_vectors.json"),
         "--topic-vectors", str(world / "topic_vectors.json"),
         "--epochs", "5", "--lr", "0.05", "--alpha", "0.01", "--seed", "0",
         "--out", str(ckpt)],
        ["index",
         "--corpus", str(world / "corpus.jsonl"),
         "--classifier", str(ckpt),
         "--embeddings", str(world / "paper_vectors.json"),
         "--provider", f"scripted:{world / 'world.json'}",
         "--m", "6", "--out", str(index)],
        ["embed-concepts",
         "--index", str(index),
         "--vectors", str(world / "concept_vectors.json"),
         "--out", str(cache)],
    ]
    for argv in steps:
        print(f"\n$ conceptrank {' '.join(argv)}")
        assert dispatch(argv) == 0

    config = root / "config.json"
    config.write_text(json.dumps({
        "paths": {
            "corpus": str(world / "corpus.jsonl"),
            "concept_cache": str(cache),
            "paper_vectors": str(world / "paper_vectors.json"),
            "query_vectors": str(world / "query_vectors.json"),
            "concept_vectors": str(world / "concept_vectors.json"),
        },
    }))
    shared = ["--config", str(config),
              "--query-file", str(world / "queries.tsv"),
              "--qrels", str(world / "qrels.tsv"),
              "--retriever", "dense",
              "--index", str(index),
              "--provider", f"scripted:{world / 'world.json'}"]

    print(f"\n$ conceptrank eval ... --ks 5 10")
    assert dispatch(["eval"] + shared + ["--ks", "5", "10"]) == 0

    print(f"\n$ conceptrank sweep ... --k-grid 5 10 25")
    assert dispatch(["sweep"] + shared + ["--ks", "10", "--k-grid", "5", "10", "25"]) == 0
