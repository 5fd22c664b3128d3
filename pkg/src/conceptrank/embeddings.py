"""Dense vector storage and embedding providers.

A matrix lives on disk as a JSON manifest (dim, count, ids, data file name)
next to a raw file of row-major little-endian float32 values. Vectors are
stored in 32-bit precision; every reduction over them accumulates in 64-bit.
Providers resolve strings to vectors either from such a file or from an
OpenAI-style HTTP embeddings endpoint.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np
import requests


class SizeMismatchError(ValueError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"data file size mismatch: expected {expected} bytes, got {got}")


class NonFiniteVectorError(ValueError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"non-finite entry in embedding row {row}")


class MissingConceptsError(KeyError):
    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"provider has no vectors for: {self.missing}")


class EmbeddingMatrix:
    """Row-per-id float32 matrix with total lookup by id."""

    def __init__(self, ids: list[str], data: np.ndarray):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError("matrix data must be 2-dimensional")
        if len(ids) != data.shape[0]:
            raise ValueError(f"{len(ids)} ids but {data.shape[0]} rows")
        bad = np.where(~np.isfinite(data).all(axis=1))[0]
        if bad.size:
            raise NonFiniteVectorError(int(bad[0]))
        self.ids = list(ids)
        self.data = data
        self._row_by_id = {i: r for r, i in enumerate(self.ids)}
        if len(self._row_by_id) != len(self.ids):
            raise ValueError("duplicate ids in embedding matrix")

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, id_: str) -> bool:
        return id_ in self._row_by_id

    def vector(self, id_: str) -> np.ndarray:
        return self.data[self._row_by_id[id_]]

    def row_index(self, id_: str) -> int:
        return self._row_by_id[id_]


def save_matrix(matrix: EmbeddingMatrix, manifest_path: str | Path) -> None:
    """Write manifest JSON plus the raw float32 data file beside it."""
    manifest_path = Path(manifest_path)
    data_name = manifest_path.stem + ".f32"
    manifest = {
        "dim": matrix.dim,
        "count": len(matrix),
        "data_file": data_name,
        "ids": matrix.ids,
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    matrix.data.astype("<f4").tofile(manifest_path.parent / data_name)


def load_matrix(manifest_path: str | Path) -> EmbeddingMatrix:
    """Load a manifest + raw data pair, rejecting byte-count mismatches."""
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    for key in ("dim", "count", "data_file", "ids"):
        if key not in manifest:
            raise ValueError(f"manifest {manifest_path} missing field {key!r}")
    dim, count = int(manifest["dim"]), int(manifest["count"])
    ids = [str(i) for i in manifest["ids"]]
    if len(ids) != count:
        raise ValueError(f"manifest count {count} but {len(ids)} ids listed")
    data_path = manifest_path.parent / manifest["data_file"]
    raw = data_path.read_bytes()
    expected = dim * count * 4
    if len(raw) != expected:
        raise SizeMismatchError(expected, len(raw))
    data = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
    return EmbeddingMatrix(ids, data.copy())


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1], accumulated in 64-bit.

    Zero vectors are a defined degenerate case and yield 0.0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot unit-normalize a zero vector")
    return (v / n).astype(np.float32)


class FileEmbeddingProvider:
    """Serves vectors for strings from a loaded matrix; misses are errors."""

    def __init__(self, matrix: EmbeddingMatrix):
        self.matrix = matrix
        self.calls = 0

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def embed(self, texts: list[str]) -> np.ndarray:
        missing = [t for t in texts if t not in self.matrix]
        if missing:
            raise MissingConceptsError(missing)
        self.calls += 1
        return np.stack([self.matrix.vector(t) for t in texts]) if texts else np.zeros((0, self.dim), np.float32)


class RemoteEmbeddingProvider:
    """OpenAI-compatible embeddings endpoint: POST a string batch, get vectors."""

    def __init__(self, base_url: str, model: str, api_key: str = "", timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.calls = 0

    def embed(self, texts: list[str]) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = requests.post(
            f"{self.base_url}/embeddings",
            json={"model": self.model, "input": texts},
            headers=headers,
            timeout=self.timeout,
        )
        resp.raise_for_status()
        self.calls += 1
        rows = [item["embedding"] for item in resp.json()["data"]]
        return np.asarray(rows, dtype=np.float32)


class ConceptEmbeddingCache:
    """Canonical concept string -> unit-normalized float32 vector.

    Populated once (single writer), then read concurrently.
    """

    def __init__(self, vectors: dict[str, np.ndarray] | None = None):
        self._vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        for k, v in (vectors or {}).items():
            self._store(k, v)

    def _store(self, concept: str, vector: np.ndarray) -> None:
        v = np.asarray(vector, dtype=np.float32)
        n = float(np.linalg.norm(v.astype(np.float64)))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"vector for {concept!r} has norm {n}, expected 1")
        self._vectors[concept] = v

    def __contains__(self, concept: str) -> bool:
        return concept in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def vector(self, concept: str) -> np.ndarray:
        if concept not in self._vectors:
            raise MissingConceptsError([concept])
        return self._vectors[concept]

    def concepts(self) -> list[str]:
        return sorted(self._vectors)

    def matrix_for(self, concepts: list[str]) -> np.ndarray:
        """Stacked vectors for a concept list, one row each."""
        missing = [c for c in concepts if c not in self._vectors]
        if missing:
            raise MissingConceptsError(missing)
        if not concepts:
            return np.zeros((0, 0), np.float32)
        return np.stack([self._vectors[c] for c in concepts])

    def update_from(self, provider, concepts: list[str]) -> int:
        """Embed any concepts not yet cached; returns provider batch count."""
        with self._lock:
            todo = sorted({c for c in concepts if c not in self._vectors})
            if not todo:
                return 0
            rows = provider.embed(todo)
            for concept, row in zip(todo, rows):
                self._store(concept, unit_normalize(row))
            return 1

    def save(self, manifest_path: str | Path) -> None:
        ids = sorted(self._vectors)
        if not ids:
            dim = 0
            data = np.zeros((0, 0), np.float32)
        else:
            data = np.stack([self._vectors[i] for i in ids])
            dim = data.shape[1]
        manifest_path = Path(manifest_path)
        manifest = {"dim": dim, "count": len(ids), "data_file": manifest_path.stem + ".f32", "ids": ids}
        with open(manifest_path, "w", encoding="utf-8") as f:
            json.dump(manifest, f)
        data.astype("<f4").tofile(manifest_path.parent / manifest["data_file"])

    @classmethod
    def load(cls, manifest_path: str | Path) -> "ConceptEmbeddingCache":
        manifest_path = Path(manifest_path)
        with open(manifest_path, encoding="utf-8") as f:
            manifest = json.load(f)
        count, dim = int(manifest["count"]), int(manifest["dim"])
        if count == 0:
            return cls()
        raw = (manifest_path.parent / manifest["data_file"]).read_bytes()
        expected = dim * count * 4
        if len(raw) != expected:
            raise SizeMismatchError(expected, len(raw))
        data = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
        return cls({str(i): data[r] for r, i in enumerate(manifest["ids"])})


def embed_concepts(concepts: list[str], provider) -> ConceptEmbeddingCache:
    """Embed distinct concept strings once each, unit-normalized.

    Repeated strings hit the cache; a file-backed provider that lacks any
    string raises MissingConceptsError listing all misses.
    """
    cache = ConceptEmbeddingCache()
    cache.update_from(provider, concepts)
    return cache
