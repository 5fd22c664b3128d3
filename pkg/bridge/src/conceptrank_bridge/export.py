"""Batch export of text embeddings into the engine's matrix file format.

Input is an id<TAB>text file, one row per line; output is the engine's
manifest (JSON with dim, count, data file name, id list) next to a raw
row-major little-endian float32 data file. Row i embeds text i, so id
alignment is positional and recorded explicitly in the manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import load_encoder


class InputLineError(ValueError):
    def __init__(self, path: str | Path, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


@dataclass
class ExportJob:
    model: str
    input_path: str | Path
    manifest_path: str | Path
    batch_size: int = 32
    max_length: int = 512
    pooling: str = "cls"
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def read_id_text_file(path: str | Path) -> tuple[list[str], list[str]]:
    ids: list[str] = []
    texts: list[str] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                raise InputLineError(path, line_no, "empty line")
            parts = line.split("\t", 1)
            if len(parts) != 2 or not parts[1].strip():
                raise InputLineError(path, line_no, "expected id<TAB>text with non-empty text")
            ids.append(parts[0].strip())
            texts.append(parts[1].strip())
    return ids, texts


def write_matrix(ids: list[str], data: np.ndarray, manifest_path: str | Path) -> None:
    """Engine matrix format: JSON manifest + raw little-endian float32 file."""
    manifest_path = Path(manifest_path)
    data = np.asarray(data, dtype=np.float32)
    manifest = {
        "dim": int(data.shape[1]),
        "count": int(data.shape[0]),
        "data_file": manifest_path.stem + ".f32",
        "ids": list(ids),
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    data.astype("<f4").tofile(manifest_path.parent / manifest["data_file"])


def export_embeddings(job: ExportJob, encoder=None) -> dict:
    """Encode every input row in order and write the manifest + data pair.

    Returns a small summary (count, dim, paths). An encoder instance may be
    passed directly; otherwise `job.model` is resolved.
    """
    ids, texts = read_id_text_file(job.input_path)
    if encoder is None:
        encoder = load_encoder(job.model, pooling=job.pooling, max_length=job.max_length, device=job.device)
    blocks = []
    for start in range(0, len(texts), job.batch_size):
        blocks.append(encoder.encode(texts[start : start + job.batch_size]))
    data = np.vstack(blocks) if blocks else np.zeros((0, encoder.dim), dtype=np.float32)
    if data.shape[0] != len(ids):
        raise RuntimeError(f"encoder produced {data.shape[0]} rows for {len(ids)} inputs")
    write_matrix(ids, data, job.manifest_path)
    return {
        "count": len(ids),
        "dim": int(data.shape[1]),
        "manifest": str(job.manifest_path),
    }
