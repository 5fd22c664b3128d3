import json

import numpy as np
import pytest

from conceptrank.embeddings import (
    ConceptEmbeddingCache,
    EmbeddingMatrix,
    FileEmbeddingProvider,
    MissingConceptsError,
    NonFiniteVectorError,
    SizeMismatchError,
    cosine,
    embed_concepts,
    load_matrix,
    save_matrix,
)


def cosine_oracle(a, b):
    # brute-force formula, independent of the implementation under test
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestMatrixFormat:
    def test_size_arithmetic(self, tmp_path):
        m = EmbeddingMatrix(["a", "b"], np.arange(8, dtype=np.float32).reshape(2, 4))
        save_matrix(m, tmp_path / "m.json")
        assert (tmp_path / "m.f32").stat().st_size == 2 * 4 * 4
        loaded = load_matrix(tmp_path / "m.json")
        assert loaded.dim == 4 and len(loaded) == 2

    def test_byte_count_mismatch_rejected(self, tmp_path):
        m = EmbeddingMatrix(["a", "b"], np.zeros((2, 4), dtype=np.float32))
        save_matrix(m, tmp_path / "m.json")
        raw = (tmp_path / "m.f32").read_bytes()
        (tmp_path / "m.f32").write_bytes(raw[:-1])
        with pytest.raises(SizeMismatchError) as err:
            load_matrix(tmp_path / "m.json")
        assert err.value.expected == 32 and err.value.got == 31

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        m = EmbeddingMatrix([f"id{i}" for i in range(10)], rng.standard_normal((10, 8)).astype(np.float32))
        save_matrix(m, tmp_path / "m.json")
        loaded = load_matrix(tmp_path / "m.json")
        assert loaded.ids == m.ids
        assert loaded.data.tobytes() == m.data.tobytes()

    def test_nan_rejected_with_row(self, tmp_path):
        data = np.zeros((3, 2), dtype=np.float32)
        data[1, 0] = np.nan
        with pytest.raises(NonFiniteVectorError) as err:
            EmbeddingMatrix(["a", "b", "c"], data)
        assert err.value.row == 1

    def test_lookup_total(self):
        m = EmbeddingMatrix(["x", "y"], np.eye(2, dtype=np.float32))
        assert "x" in m and "z" not in m
        assert np.allclose(m.vector("y"), [0, 1])


class TestCosine:
    def test_self_similarity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = rng.standard_normal(8)
            assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_matches_formula_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            a, b = rng.standard_normal(16), rng.standard_normal(16)
            assert cosine(a, b) == pytest.approx(cosine_oracle(a, b), abs=1e-6)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b = rng.standard_normal(5), rng.standard_normal(5)
            assert cosine(a, b) == cosine(b, a)
            assert abs(cosine(a, b)) <= 1 + 1e-9

    def test_scale_invariant(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            a, b = rng.standard_normal(6), rng.standard_normal(6)
            lam = float(rng.uniform(0.01, 100.0))
            assert cosine(lam * a, b) == pytest.approx(cosine(a, b), abs=1e-6)

    def test_zero_vector_defined_as_zero(self):
        assert cosine(np.zeros(3), np.ones(3)) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            cosine(np.ones(2), np.ones(3))

    def test_normalized_cosine_equals_dot(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = rng.standard_normal(8), rng.standard_normal(8)
            ua, ub = a / np.linalg.norm(a), b / np.linalg.norm(b)
            assert cosine(a, b) == pytest.approx(float(ua @ ub), abs=1e-6)


class TestEmbedConcepts:
    def provider(self, vectors):
        ids = list(vectors)
        data = np.stack([vectors[i] for i in ids]).astype(np.float32)
        return FileEmbeddingProvider(EmbeddingMatrix(ids, data))

    def test_repeated_concepts_one_call(self):
        provider = self.provider({"a": np.array([1.0, 0.0])})
        cache = embed_concepts(["a", "a"], provider)
        assert provider.calls == 1
        assert len(cache) == 1

    def test_normalization(self):
        provider = self.provider({"a": np.array([3.0, 4.0])})
        cache = embed_concepts(["a"], provider)
        assert np.allclose(cache.vector("a"), [0.6, 0.8], atol=1e-7)

    def test_missing_concepts_listed(self):
        provider = self.provider({"a": np.array([1.0, 0.0])})
        with pytest.raises(MissingConceptsError) as err:
            embed_concepts(["a", "b"], provider)
        assert err.value.missing == ["b"]

    def test_cache_hits_skip_provider(self):
        provider = self.provider({"a": np.array([1.0, 0.0]), "b": np.array([0.0, 2.0])})
        cache = embed_concepts(["a"], provider)
        assert provider.calls == 1
        cache.update_from(provider, ["a"])  # all hits: no new call
        assert provider.calls == 1
        cache.update_from(provider, ["a", "b"])
        assert provider.calls == 2

    def test_unit_norm_invariant(self):
        rng = np.random.default_rng(6)
        vectors = {f"c{i}": rng.standard_normal(12) for i in range(50)}
        cache = embed_concepts(list(vectors), self.provider(vectors))
        for c in cache.concepts():
            assert abs(np.linalg.norm(cache.vector(c).astype(np.float64)) - 1.0) <= 1e-6

    def test_cache_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(7)
        vectors = {f"c{i}": rng.standard_normal(6) for i in range(9)}
        cache = embed_concepts(list(vectors), self.provider(vectors))
        cache.save(tmp_path / "cache.json")
        loaded = ConceptEmbeddingCache.load(tmp_path / "cache.json")
        assert loaded.concepts() == cache.concepts()
        for c in cache.concepts():
            assert loaded.vector(c).tobytes() == cache.vector(c).tobytes()

    def test_empty_cache_round_trip(self, tmp_path):
        cache = ConceptEmbeddingCache()
        cache.save(tmp_path / "cache.json")
        assert len(ConceptEmbeddingCache.load(tmp_path / "cache.json")) == 0


class TestRemoteProvider:
    @pytest.fixture
    def embedding_server(self):
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                # one orthogonal unit vector per input string, by arrival order
                data = [{"embedding": [1.0 if d == i else 0.0 for d in range(4)]} for i in range(len(body["input"]))]
                payload = json.dumps({"data": data}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        yield f"http://127.0.0.1:{server.server_port}/v1"
        server.shutdown()

    def test_string_batch_to_vector_batch(self, embedding_server):
        from conceptrank.embeddings import RemoteEmbeddingProvider

        provider = RemoteEmbeddingProvider(embedding_server, "vectorizer")
        rows = provider.embed(["alpha", "beta"])
        assert rows.shape == (2, 4)
        assert np.allclose(rows[0], [1, 0, 0, 0]) and np.allclose(rows[1], [0, 1, 0, 0])

    def test_embed_concepts_over_remote(self, embedding_server):
        from conceptrank.embeddings import RemoteEmbeddingProvider

        cache = embed_concepts(["one concept", "another"], RemoteEmbeddingProvider(embedding_server, "v"))
        assert len(cache) == 2
        for c in cache.concepts():
            assert abs(np.linalg.norm(cache.vector(c).astype(np.float64)) - 1.0) <= 1e-6
