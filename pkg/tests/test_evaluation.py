import numpy as np
import pytest

from conceptrank.corpus import Qrels, Query, ScoredList
from conceptrank.evaluation import pipeline_with_k, recall_at_k, run_eval, sweep_k, sweep_table
from conceptrank.llm import MockProvider, RecordingProvider, ReplayProvider

from conftest import build_world_pipeline


def ranking_of(ids):
    return ScoredList.from_scores("q", {pid: float(len(ids) - i) for i, pid in enumerate(ids)})


class TestRecallAtK:
    def test_all_relevant_in_top_k(self):
        assert recall_at_k(ranking_of(["a", "b", "c"]), {"a", "b"}, 2) == 1.0

    def test_partial(self):
        ranking = ranking_of([f"d{i}" for i in range(60)])
        relevant = {"d0", "d1", "d90", "d91"}
        assert recall_at_k(ranking, relevant, 50) == 0.5

    def test_k_zero_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k(ranking_of(["a"]), {"a"}, 0)

    def test_empty_relevant_rejected(self):
        with pytest.raises(ValueError):
            recall_at_k(ranking_of(["a"]), set(), 5)

    def test_monotone_in_k(self):
        rng = np.random.default_rng(50)
        for _ in range(100):
            n = int(rng.integers(5, 40))
            ids = [f"d{i:02d}" for i in range(n)]
            rng.shuffle(ids)
            ranking = ranking_of(list(ids))
            relevant = set(rng.choice(ids, size=int(rng.integers(1, n)), replace=False).tolist())
            values = [recall_at_k(ranking, relevant, k) for k in range(1, n + 5)]
            assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


class _IdentityPipeline:
    """Returns the query's relevant documents first; an oracle pipeline."""

    def __init__(self, qrels):
        self.qrels = qrels

    def run(self, query):
        from types import SimpleNamespace

        ids = sorted(self.qrels.for_query(query.id))
        ranking = ranking_of(ids)
        return SimpleNamespace(
            ranking=ScoredList(query.id, ranking.entries),
            ledger={"llm_calls": 0, "retriever_calls": 1, "completion_tokens": 0, "wall_time_s": 0.0},
        )


class TestRunEval:
    def test_identity_pipeline_perfect_recall(self):
        qrels = Qrels({"q1": {"a", "b"}, "q2": {"c"}})
        queries = [Query("q1", "one"), Query("q2", "two")]
        report = run_eval(queries, qrels, _IdentityPipeline(qrels), ks=[2, 10])
        assert report.recall[2] == 1.0 and report.recall[10] == 1.0

    def test_queries_without_judgments_skipped(self):
        qrels = Qrels({"q1": {"a"}})
        queries = [Query("q1", "one"), Query("q2", "two")]
        report = run_eval(queries, qrels, _IdentityPipeline(qrels), ks=[1])
        assert report.skipped_queries == 1
        assert report.n_evaluated == 1

    def test_macro_average_matches_recomputation(self, small_world):
        pipe = build_world_pipeline(small_world)
        report = run_eval(small_world.queries, small_world.qrels, pipe, ks=[5, 10])
        recomputed = report.recompute_recall()
        for k in report.ks:
            assert abs(report.recall[k] - recomputed[k]) < 1e-12

    def test_default_mode_means_exactly_one_llm_call(self, small_world):
        pipe = build_world_pipeline(small_world)
        report = run_eval(small_world.queries, small_world.qrels, pipe, ks=[10])
        assert report.mean_llm_calls == 1.0
        assert report.mean_retriever_calls == 1.0

    def test_replay_rerun_identical_report(self, small_world, tmp_path):
        store = tmp_path / "store.jsonl"
        recording = RecordingProvider(MockProvider(small_world.scripted_rule()), store)
        fixed_clock = lambda: 0.0
        pipe = build_world_pipeline(small_world, provider=recording, clock=fixed_clock)
        run_eval(small_world.queries, small_world.qrels, pipe, ks=[10])

        replay_pipe = lambda: build_world_pipeline(small_world, provider=ReplayProvider(store), clock=fixed_clock)
        first = run_eval(small_world.queries, small_world.qrels, replay_pipe(), ks=[10])
        second = run_eval(small_world.queries, small_world.qrels, replay_pipe(), ks=[10])
        assert first.to_json() == second.to_json()

    def test_table_has_efficiency_columns(self, small_world):
        pipe = build_world_pipeline(small_world)
        report = run_eval(small_world.queries, small_world.qrels, pipe, ks=[10])
        table = report.table()
        for column in ("R@10", "#RET", "#LLM", "LLM Output Len", "Running Time"):
            assert column in table

    def test_report_round_trip(self, small_world, tmp_path):
        pipe = build_world_pipeline(small_world)
        report = run_eval(small_world.queries, small_world.qrels, pipe, ks=[10])
        report.save(tmp_path / "report.json")
        assert (tmp_path / "report.json").read_text().strip() == report.to_json()


class TestSweep:
    def test_default_grid_yields_six_sorted_reports(self, small_world):
        pipe = build_world_pipeline(small_world)
        results = sweep_k(
            small_world.queries[:3],
            small_world.qrels,
            lambda k: pipeline_with_k(pipe, k),
            ks=[10],
        )
        assert [k for k, _ in results] == [5, 10, 25, 50, 75, 100]
        for _, report in results:
            assert 0.0 <= report.recall[10] <= 1.0

    def test_single_k_equals_run_eval(self, small_world):
        pipe = build_world_pipeline(small_world, clock=lambda: 0.0)
        results = sweep_k(small_world.queries[:3], small_world.qrels, lambda k: pipeline_with_k(pipe, k), [7], ks=[10])
        assert len(results) == 1
        direct = run_eval(small_world.queries[:3], small_world.qrels, pipeline_with_k(pipe, 7), ks=[10])
        assert results[0][1].recall == direct.recall

    def test_sweep_table_lists_all_rows(self, small_world):
        pipe = build_world_pipeline(small_world, clock=lambda: 0.0)
        results = sweep_k(small_world.queries[:2], small_world.qrels, lambda k: pipeline_with_k(pipe, k), [5, 10], ks=[10])
        table = sweep_table(results)
        assert table.splitlines()[0].split() == ["k", "R@10"]
        assert len(table.splitlines()) == 3

    def test_sweep_accepts_plain_pipeline(self, small_world):
        pipe = build_world_pipeline(small_world, clock=lambda: 0.0)
        via_pipeline = sweep_k(small_world.queries[:2], small_world.qrels, pipe, [5, 10], ks=[10])
        via_factory = sweep_k(
            small_world.queries[:2], small_world.qrels, lambda k: pipeline_with_k(pipe, k), [5, 10], ks=[10]
        )
        assert [(k, rep.recall) for k, rep in via_pipeline] == [(k, rep.recall) for k, rep in via_factory]
