"""Building the semantic index: classifier candidates -> one LLM call per
paper -> validated topics and phrases, persisted incrementally with resume.

A scripted rule stands in for the LLM so the demo runs offline; swap in
HttpChatProvider for a real endpoint.
"""

import tempfile
from pathlib import Path

from conceptrank import CallLedger, MockProvider, SyntheticSpec, generate
from conceptrank.classifier import ClassifierParams, TrainingConfig
from conceptrank.indexing import build_index

world = generate(SyntheticSpec(n_docs=30, n_topics=3, embedding_dim=16, noise_scale=0.3, seed=1))
classifier = ClassifierParams.initial(
    world.topic_matrix.data.astype(float),
    list(world.label_space),
    TrainingConfig(learning_rate=0.05, epochs=1, alpha=1e-2),
)
provider = MockProvider(world.scripted_rule())

with tempfile.TemporaryDirectory() as tmp:
    index_path = Path(tmp) / "index.jsonl"

    # interrupt after the first 12 papers, then resume
    ledger = CallLedger()
    build_index(world.papers[:12], classifier, world.paper_matrix, provider, m=3,
                index_path=index_path, ledger=ledger)
    print(f"cold build over 12 papers: {ledger.llm_calls} LLM calls")

    ledger.reset()
    index, report = build_index(world.papers, classifier, world.paper_matrix, provider, m=3,
                                index_path=index_path, ledger=ledger)
    print(f"resumed build: {ledger.llm_calls} further calls "
          f"({report.papers_resumed} resumed, {report.papers_indexed} new)")

entry = index.entry(world.papers[0].id)
print(f"\nentry for {entry.paper_id}:")
print(f"  topics : {list(entry.topics)}")
print(f"  phrases: {list(entry.phrases)}")

df = index.document_frequencies()
print("\nmost frequent concepts:")
for concept in sorted(df, key=lambda c: (-df[c], c))[:5]:
    print(f"  {concept:25s} df={df[concept]}")
