import numpy as np
import pytest

from conceptrank.corpus import load_corpus, load_label_space, load_qrels, load_queries
from conceptrank.embeddings import load_matrix
from conceptrank.evaluation import recall_at_k
from conceptrank.indexing import SemanticIndex
from conceptrank.retrievers import DenseIndex, QueryVectorLookup, dense_search
from conceptrank.synthetic import SyntheticSpec, generate, load_world_metadata, make_scripted_rule


class TestDeterminism:
    def test_same_spec_same_world(self):
        spec = SyntheticSpec(n_docs=200, n_topics=10, seed=0)
        a, b = generate(spec), generate(spec)
        assert a.papers == b.papers
        assert a.gold_entries == b.gold_entries
        assert a.paper_matrix.data.tobytes() == b.paper_matrix.data.tobytes()
        assert a.query_matrix.data.tobytes() == b.query_matrix.data.tobytes()
        assert a.qrels.relevant == b.qrels.relevant

    def test_different_seeds_differ(self):
        a = generate(SyntheticSpec(n_docs=20, n_topics=2, seed=0))
        b = generate(SyntheticSpec(n_docs=20, n_topics=2, seed=1))
        assert a.paper_matrix.data.tobytes() != b.paper_matrix.data.tobytes()


class TestPlantedStructure:
    def test_zero_noise_dense_recall_is_one(self):
        world = generate(SyntheticSpec(n_docs=40, n_topics=4, noise_scale=0.0, seed=2))
        index = DenseIndex(world.paper_matrix, [p.id for p in world.papers])
        lookup = QueryVectorLookup(world.query_matrix)
        docs_per_topic = 10
        for q in world.queries:
            ranking = dense_search(index, lookup.query_vector(q), 40, q.id)
            assert recall_at_k(ranking, world.qrels.for_query(q.id), docs_per_topic) == 1.0

    def test_gold_df_equals_docs_per_topic(self):
        world = generate(SyntheticSpec(n_docs=60, n_topics=6, seed=4))
        df = world.gold_index().recount_frequencies()
        for i, topic in enumerate(world.label_space.topics):
            planted_docs = sum(1 for t in world.doc_topic.values() if t == i)
            assert df[topic.name] == planted_docs

    def test_nearest_centroid_recovers_planted_topic(self):
        world = generate(SyntheticSpec(n_docs=200, n_topics=10, noise_scale=0.5, seed=5))
        centroids = world.topic_matrix.data.astype(np.float64)
        hits = 0
        for p in world.papers:
            v = world.paper_matrix.vector(p.id).astype(np.float64)
            sims = centroids @ (v / np.linalg.norm(v))
            hits += int(np.argmax(sims)) == world.doc_topic[p.id]
        assert hits >= 0.95 * len(world.papers)

    def test_abstract_grounds_planted_concepts(self):
        world = generate(SyntheticSpec(n_docs=30, n_topics=3, seed=6))
        for paper, entry in zip(world.papers, world.gold_entries):
            assert entry.topics[0] in paper.text.lower()
            for phrase in entry.phrases:
                assert phrase in paper.text.lower()


class TestScriptedRule:
    def test_index_prompt_answers_planted_entry(self):
        from conceptrank.indexing import render_index_prompt

        world = generate(SyntheticSpec(n_docs=12, n_topics=3, seed=7))
        rule = world.scripted_rule()
        paper = world.papers[0]
        entry = world.gold_entries[0]
        reply = rule(render_index_prompt(paper, [entry.topics[0], "other topic"]))
        assert f"<top>{entry.topics[0]}</top>" in reply
        for phrase in entry.phrases:
            assert phrase in reply

    def test_query_prompt_restricted_to_candidates(self):
        world = generate(SyntheticSpec(n_docs=12, n_topics=3, seed=8))
        rule = world.scripted_rule()
        query = world.queries[0]
        planted = world.label_space.topics[world.query_topic[query.id]].name
        prompt = (
            "Retriever result: 1. Something\n\n"
            f"Candidate topics: {planted} (3)\n\n"
            "Candidate key terms: \n\n"
            f"Original Query: {query.text}"
        )
        reply = rule(prompt)
        assert reply == f"<ans>{planted}</ans>"


class TestEmittedFiles:
    def test_standard_loaders_accept_world_files(self, tmp_path):
        world = generate(SyntheticSpec(n_docs=24, n_topics=4, seed=9))
        world.write(tmp_path)
        papers = load_corpus(tmp_path / "corpus.jsonl")
        assert [p.id for p in papers] == [p.id for p in world.papers]
        space = load_label_space(tmp_path / "labels.tsv")
        assert space.names() == world.label_space.names()
        queries = load_queries(tmp_path / "queries.tsv")
        assert queries == world.queries
        qrels = load_qrels(tmp_path / "qrels.tsv", known_ids={p.id for p in papers})
        assert qrels.relevant == world.qrels.relevant
        index = SemanticIndex.load(tmp_path / "gold_index.jsonl")
        assert len(index) == 24
        for name in ("paper_vectors", "topic_vectors", "query_vectors", "concept_vectors"):
            matrix = load_matrix(tmp_path / f"{name}.json")
            assert matrix.dim == world.spec.embedding_dim

    def test_metadata_rebuilds_scripted_rule(self, tmp_path):
        world = generate(SyntheticSpec(n_docs=12, n_topics=3, seed=10))
        world.write(tmp_path)
        rule = make_scripted_rule(load_world_metadata(tmp_path / "world.json"))
        query = world.queries[0]
        planted = world.label_space.topics[world.query_topic[query.id]].name
        reply = rule(f"Original Query: {query.text}")
        assert planted in reply
