import numpy as np
import pytest

from conceptrank.classifier import ClassifierParams
from conceptrank.corpus import Paper, Topic
from conceptrank.embeddings import EmbeddingMatrix, FileEmbeddingProvider, MissingConceptsError
from conceptrank.indexing import (
    IndexEntry,
    SemanticIndex,
    build_entry,
    build_index,
    concept_vectors,
    phrase_is_grounded,
)
from conceptrank.llm import CallLedger, MockProvider


@pytest.fixture
def paper():
    return Paper("p1", "Evaluating generation", "We analyze hallucinated content in text generation models.")


@pytest.fixture
def candidates():
    return [
        (Topic("t1", "c1"), 2.0),
        (Topic("t2", "c2"), 1.5),
        (Topic("t3", "c3"), 1.0),
        (Topic("t4", "c4"), 0.5),
    ]


class TestBuildEntry:
    def test_happy_path(self, paper, candidates):
        provider = MockProvider(lambda p: "<top>c1</top><kp>text generation</kp>")
        entry, stats = build_entry(paper, candidates, provider)
        assert entry.topics == ("c1",)
        assert entry.phrases == ("text generation",)
        assert stats.topic_violations == 0 and not stats.fallback

    def test_out_of_candidate_topic_dropped(self, paper, candidates):
        provider = MockProvider(lambda p: "<top>x, c2</top><kp></kp>")
        entry, stats = build_entry(paper, candidates, provider)
        assert entry.topics == ("c2",)
        assert stats.topic_violations == 1

    def test_ungrounded_phrase_dropped_in_strict_mode(self, paper, candidates):
        provider = MockProvider(lambda p: "<top>c1</top><kp>quantum chemistry</kp>")
        entry, stats = build_entry(paper, candidates, provider, strict_phrases=True)
        assert entry.phrases == ()
        assert stats.phrase_drops == 1

    def test_lenient_mode_accepts_inflected_phrase(self, paper, candidates):
        # tokens of the phrase all occur in the text even though the exact
        # string does not
        provider = MockProvider(lambda p: "<top>c1</top><kp>generation models</kp>")
        entry, _ = build_entry(paper, candidates, provider, strict_phrases=False)
        assert "generation models" in entry.phrases

    def test_parse_failure_falls_back_to_top3(self, paper, candidates):
        provider = MockProvider(lambda p: "no tags at all")
        ledger = CallLedger()
        entry, stats = build_entry(paper, candidates, provider, ledger)
        assert entry.topics == ("c1", "c2", "c3")
        assert entry.phrases == ()
        assert stats.parse_failure and stats.fallback
        assert ledger.llm_calls == 1

    def test_empty_top_after_filtering_falls_back(self, paper, candidates):
        provider = MockProvider(lambda p: "<top>unknown</top><kp></kp>")
        entry, stats = build_entry(paper, candidates, provider)
        assert entry.topics == ("c1", "c2", "c3")
        assert stats.fallback

    def test_caps_applied(self, paper):
        many = [(Topic(f"t{i}", f"cand{i:02d}"), 1.0) for i in range(30)]
        topics_reply = ", ".join(f"cand{i:02d}" for i in range(30))
        phrases_reply = ", ".join(["text generation"] * 1 + [f"content {i}" for i in range(30)])
        provider = MockProvider(lambda p: f"<top>{topics_reply}</top><kp>{phrases_reply}</kp>")
        entry, _ = build_entry(paper, many, provider, strict_phrases=False)
        assert len(entry.topics) == 10
        assert len(entry.phrases) <= 20

    def test_prompt_contains_paper_and_candidates(self, paper, candidates):
        prompts = []

        def rule(p):
            prompts.append(p)
            return "<top>c1</top><kp></kp>"

        build_entry(paper, candidates, MockProvider(rule))
        assert paper.text in prompts[0]
        assert "c1, c2, c3, c4" in prompts[0]


class TestPhraseGrounding:
    def test_strict_substring(self):
        assert phrase_is_grounded("Hallucinated  Content", "We study hallucinated content here.", strict=True)
        assert not phrase_is_grounded("hallucination", "We study hallucinated content.", strict=True)

    def test_lenient_token_membership(self):
        assert phrase_is_grounded("content hallucinated", "hallucinated content appears", strict=False)
        assert not phrase_is_grounded("novel idea", "hallucinated content appears", strict=False)


def make_world(n_papers=10, dim=4):
    papers = [Paper(f"d{i}", f"Paper {i}", f"About area{i % 3} and methods.") for i in range(n_papers)]
    topics = [Topic(f"t{j}", f"area{j}") for j in range(3)]
    rng = np.random.default_rng(0)
    vectors = EmbeddingMatrix([p.id for p in papers], rng.standard_normal((n_papers, dim)).astype(np.float32))
    params = ClassifierParams(np.eye(dim), rng.standard_normal((3, dim)), topics)
    return papers, params, vectors


class TestBuildIndex:
    def rule(self, prompt):
        # answer with whichever area token occurs in the paper text
        for j in range(3):
            if f"area{j}" in prompt:
                return f"<top>area{j}</top><kp>methods</kp>"
        return "<top></top><kp></kp>"

    def test_one_llm_call_per_paper(self, tmp_path):
        papers, params, vectors = make_world()
        ledger = CallLedger()
        index, report = build_index(papers, params, vectors, MockProvider(self.rule), m=3, ledger=ledger)
        assert ledger.llm_calls == 10
        assert len(index) == 10
        assert report.papers_indexed == 10

    def test_resume_makes_only_remaining_calls(self, tmp_path):
        papers, params, vectors = make_world()
        path = tmp_path / "index.jsonl"
        ledger = CallLedger()
        build_index(papers[:6], params, vectors, MockProvider(self.rule), m=3, index_path=path, ledger=ledger)
        assert ledger.llm_calls == 6
        ledger.reset()
        index, report = build_index(papers, params, vectors, MockProvider(self.rule), m=3, index_path=path, ledger=ledger)
        assert ledger.llm_calls == 4
        assert report.papers_resumed == 6 and report.papers_indexed == 4
        assert len(index) == 10

    def test_cold_and_resumed_files_identical(self, tmp_path):
        papers, params, vectors = make_world()
        cold = tmp_path / "cold.jsonl"
        build_index(papers, params, vectors, MockProvider(self.rule), m=3, index_path=cold)
        warm = tmp_path / "warm.jsonl"
        build_index(papers[:4], params, vectors, MockProvider(self.rule), m=3, index_path=warm)
        build_index(papers, params, vectors, MockProvider(self.rule), m=3, index_path=warm)
        assert cold.read_bytes() == warm.read_bytes()

    def test_empty_corpus_rejected(self):
        _, params, vectors = make_world()
        with pytest.raises(ValueError):
            build_index([], params, vectors, MockProvider(self.rule))

    def test_index_round_trip(self, tmp_path):
        papers, params, vectors = make_world()
        path = tmp_path / "index.jsonl"
        index, _ = build_index(papers, params, vectors, MockProvider(self.rule), m=3, index_path=path)
        loaded = SemanticIndex.load(path)
        assert loaded.entries == index.entries

    def test_replay_rebuild_bit_identical(self, tmp_path):
        from conceptrank.llm import RecordingProvider, ReplayProvider

        papers, params, vectors = make_world()
        store = tmp_path / "store.jsonl"
        first = tmp_path / "first.jsonl"
        recording = RecordingProvider(MockProvider(self.rule), store)
        build_index(papers, params, vectors, recording, m=3, index_path=first)
        second = tmp_path / "second.jsonl"
        build_index(papers, params, vectors, ReplayProvider(store), m=3, index_path=second)
        assert first.read_bytes() == second.read_bytes()


class TestVocabulary:
    def test_df_matches_recount_on_random_indexes(self):
        rng = np.random.default_rng(9)
        names = [f"concept{i}" for i in range(12)]
        for _ in range(50):
            entries = []
            for d in range(int(rng.integers(1, 15))):
                topics = tuple(rng.choice(names, size=int(rng.integers(0, 4)), replace=False))
                phrases = tuple(rng.choice(names, size=int(rng.integers(0, 4)), replace=False))
                entries.append(IndexEntry(f"d{d}", topics, phrases))
            index = SemanticIndex(entries)
            assert index.document_frequencies() == index.recount_frequencies()

    def test_entry_concepts_are_union(self):
        e = IndexEntry("d", ("a", "b"), ("b", "c"))
        assert e.concepts() == ["a", "b", "c"]


class TestConceptVectors:
    def test_concepts_embedded_once(self):
        entries = [IndexEntry(f"d{i}", ("shared topic",), ("shared phrase",)) for i in range(40)]
        entries += [IndexEntry("dx", ("rare topic",), ("rare one", "rare two"))]
        index = SemanticIndex(entries)
        rng = np.random.default_rng(3)
        vocab = index.vocabulary()
        matrix = EmbeddingMatrix(vocab, rng.standard_normal((len(vocab), 8)).astype(np.float32))
        provider = FileEmbeddingProvider(matrix)
        cache = concept_vectors(index, provider)
        assert len(cache) == 5
        assert provider.calls == 1  # one deduplicated batch

    def test_empty_index_gives_empty_cache(self):
        provider = FileEmbeddingProvider(EmbeddingMatrix(["x"], np.ones((1, 2), np.float32)))
        assert len(concept_vectors(SemanticIndex(), provider)) == 0

    def test_provider_miss_lists_strings(self):
        index = SemanticIndex([IndexEntry("d", ("known", "unknown"), ())])
        provider = FileEmbeddingProvider(EmbeddingMatrix(["known"], np.ones((1, 2), np.float32)))
        with pytest.raises(MissingConceptsError) as err:
            concept_vectors(index, provider)
        assert err.value.missing == ["unknown"]
