"""Text encoders behind a single encode(texts) -> matrix interface.

`hash://<dim>` is a deterministic pseudo-encoder (seeded per text) for
offline pipelines and tests; any other identifier resolves to a Hugging Face
checkpoint via transformers, run in inference mode with CLS or mean pooling.
"""

from __future__ import annotations

import hashlib

import numpy as np


class HashEncoder:
    """Deterministic stand-in encoder: same text, same vector, any machine."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"encoder dim must be >= 1, got {dim}")
        self.dim = dim

    def encode(self, texts: list[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
            rows[i] = np.random.default_rng(seed).standard_normal(self.dim).astype(np.float32)
        return rows


class TransformerEncoder:
    """Frozen pretrained encoder; deterministic in eval mode on CPU."""

    def __init__(self, model_id: str, pooling: str = "cls", max_length: int = 512, device: str = "cpu"):
        if pooling not in ("cls", "mean"):
            raise ValueError(f"pooling must be cls or mean, got {pooling!r}")
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModel.from_pretrained(model_id).to(device).eval()
        self.pooling = pooling
        self.max_length = max_length
        self.device = device
        self.dim = int(self.model.config.hidden_size)

    def encode(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        batch = self.tokenizer(
            texts, padding=True, truncation=True, max_length=self.max_length, return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            hidden = self.model(**batch).last_hidden_state
        if self.pooling == "cls":
            pooled = hidden[:, 0]
        else:
            mask = batch["attention_mask"].unsqueeze(-1)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        return pooled.cpu().numpy().astype(np.float32)


def load_encoder(model_id: str, pooling: str = "cls", max_length: int = 512, device: str = "cpu"):
    if model_id.startswith("hash://"):
        return HashEncoder(int(model_id.removeprefix("hash://")))
    return TransformerEncoder(model_id, pooling=pooling, max_length=max_length, device=device)
