"""Multi-label topic classifier over frozen document embeddings.

Affinity between topic j and document i is the bilinear logit
z_ij = t_j^T W d_i. Membership probability applies a sigmoid to exp(z)
(the `sigmoid_exp` link; a plain `sigmoid` link is available as a config
switch). Training minimizes binary cross entropy with negative terms
down-weighted by alpha, updating only W and the topic embeddings; document
embeddings are fixed inputs and receive no gradient.

Gradients are analytic. With u = exp(z) and p = sigmoid(u):
    d(-log p)/dz      = -(1 - p) * u
    d(-log(1 - p))/dz = p * u
and z maps to the parameters through dz/dW = t d^T, dz/dt = W d. Logits are
clamped to [-logit_clamp, +logit_clamp] before exponentiation and clamped
entries propagate zero gradient, as do negatives whose log(1 - p) hit the
numeric floor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LabelSpace, Topic
from .embeddings import EmbeddingMatrix, load_matrix, save_matrix

LOG_FLOOR = float(np.log(1e-12))
LINKS = ("sigmoid_exp", "sigmoid")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")


@dataclass
class TrainingConfig:
    learning_rate: float
    epochs: int
    alpha: float
    batch_size: int = 32
    seed: int = 0
    logit_clamp: float = 30.0
    link: str = "sigmoid_exp"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.logit_clamp <= 0:
            raise ValueError(f"logit_clamp must be > 0, got {self.logit_clamp}")
        if self.link not in LINKS:
            raise ValueError(f"link must be one of {LINKS}, got {self.link!r}")


class ClassifierParams:
    """Trainable state: interaction matrix W and topic embeddings."""

    def __init__(
        self,
        w: np.ndarray,
        topic_embeddings: np.ndarray,
        topics: list[Topic],
        link: str = "sigmoid_exp",
        logit_clamp: float = 30.0,
    ):
        self.w = np.asarray(w, dtype=np.float64)
        self.topic_embeddings = np.asarray(topic_embeddings, dtype=np.float64)
        self.topics = list(topics)
        self.link = link
        self.logit_clamp = float(logit_clamp)
        dim = self.w.shape[0]
        if self.w.shape != (dim, dim):
            raise ValueError(f"W must be square, got {self.w.shape}")
        if self.topic_embeddings.shape != (len(self.topics), dim):
            raise ValueError(
                f"topic embeddings {self.topic_embeddings.shape} inconsistent with "
                f"{len(self.topics)} topics of dim {dim}"
            )
        if not (np.isfinite(self.w).all() and np.isfinite(self.topic_embeddings).all()):
            raise ValueError("classifier parameters contain non-finite entries")

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    @classmethod
    def initial(cls, topic_vectors: np.ndarray, topics: list[Topic], config: TrainingConfig) -> "ClassifierParams":
        """Fresh parameters: W = identity, topic rows seeded from the encoder."""
        dim = np.asarray(topic_vectors).shape[1]
        return cls(np.eye(dim), np.array(topic_vectors, dtype=np.float64), topics,
                   link=config.link, logit_clamp=config.logit_clamp)


class LabeledCorpus:
    """Frozen document embeddings plus per-document positive topic sets."""

    def __init__(
        self,
        doc_vectors: np.ndarray,
        positives: list[set[int]],
        label_space: LabelSpace,
        topic_vectors: np.ndarray,
    ):
        self.doc_vectors = np.asarray(doc_vectors, dtype=np.float64)
        if self.doc_vectors.ndim != 2 or len(positives) != self.doc_vectors.shape[0]:
            raise ValueError("one positive-topic set required per document row")
        n_topics = len(label_space)
        for i, pos in enumerate(positives):
            bad = [j for j in pos if not 0 <= j < n_topics]
            if bad:
                raise ValueError(f"document {i} has positive topics outside the label space: {bad}")
        self.positives = [set(p) for p in positives]
        self.label_space = label_space
        self.topic_vectors = np.asarray(topic_vectors, dtype=np.float64)
        if self.topic_vectors.shape != (n_topics, self.doc_vectors.shape[1]):
            raise ValueError("topic seed vectors inconsistent with label space / embedding dim")

    def __len__(self) -> int:
        return len(self.positives)

    def subset(self, indices) -> tuple[np.ndarray, list[set[int]]]:
        idx = np.asarray(indices, dtype=np.intp)
        return self.doc_vectors[idx], [self.positives[int(i)] for i in idx]


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logits(params: ClassifierParams, doc_vectors: np.ndarray) -> np.ndarray:
    """Raw bilinear logits, shape (n_docs, n_topics), clamp not applied."""
    d = np.atleast_2d(np.asarray(doc_vectors, dtype=np.float64))
    return d @ params.w.T @ params.topic_embeddings.T


def predict_proba(params: ClassifierParams, doc_vector: np.ndarray, topic_index: int) -> float:
    """Membership probability for one (document, topic) pair."""
    z = float(logits(params, doc_vector)[0, topic_index])
    z = min(max(z, -params.logit_clamp), params.logit_clamp)
    u = np.exp(z) if params.link == "sigmoid_exp" else z
    return float(_sigmoid(np.asarray([u]))[0])


def loss_and_gradients(
    params: ClassifierParams,
    batch: tuple[np.ndarray, list[set[int]]],
    config: TrainingConfig,
) -> tuple[float, np.ndarray, np.ndarray]:
    """BCE loss over a batch and its gradients w.r.t. W and topic embeddings.

    loss = -sum_i [ sum_{j in pos_i} log p_ij + alpha * sum_{j not in pos_i} log(1 - p_ij) ]
    """
    doc_vectors, positives = batch
    d = np.atleast_2d(np.asarray(doc_vectors, dtype=np.float64))
    if d.shape[0] == 0:
        raise ValueError("empty batch")
    t = params.topic_embeddings
    n_docs, n_topics = d.shape[0], t.shape[0]

    # non-finite inputs surface as a non-finite loss, which train() turns
    # into TrainingDivergedError; no need for numpy warnings on the way
    with np.errstate(invalid="ignore"):
        z_raw = d @ params.w.T @ t.T
    c = config.logit_clamp
    z = np.clip(z_raw, -c, c)
    active = np.abs(z_raw) <= c

    if config.link == "sigmoid_exp":
        u = np.exp(z)
        du_dz = u
    else:
        u = z
        du_dz = np.ones_like(z)
    p = _sigmoid(u)
    log_p = -_softplus(-u)
    log_1mp_raw = -_softplus(u)
    floored = log_1mp_raw < LOG_FLOOR
    log_1mp = np.maximum(log_1mp_raw, LOG_FLOOR)

    pos = np.zeros((n_docs, n_topics), dtype=bool)
    for i, topic_set in enumerate(positives):
        for j in topic_set:
            pos[i, j] = True

    loss = -(log_p[pos].sum() + config.alpha * log_1mp[~pos].sum())

    # dLoss/dz per cell; clamped cells and floored negatives contribute zero
    g = np.where(pos, -(1.0 - p) * du_dz, config.alpha * p * du_dz)
    g[~pos & floored] = 0.0
    g *= active

    with np.errstate(invalid="ignore"):
        grad_w = t.T @ g.T @ d
        grad_topics = g.T @ (d @ params.w.T)
    return float(loss), grad_w, grad_topics


def train(corpus: LabeledCorpus, config: TrainingConfig) -> tuple[ClassifierParams, list[float]]:
    """Mini-batch gradient descent with a fixed learning rate.

    Deterministic for a given seed: the only randomness is the per-epoch
    shuffle. Returns final parameters and the per-epoch loss trace (sum of
    batch losses across one full pass).
    """
    params = ClassifierParams.initial(corpus.topic_vectors, list(corpus.label_space), config)
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    n = len(corpus)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = corpus.subset(order[start : start + config.batch_size])
            loss, grad_w, grad_topics = loss_and_gradients(params, batch, config)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, b)
            params.w -= config.learning_rate * grad_w
            params.topic_embeddings -= config.learning_rate * grad_topics
            epoch_loss += loss
        trace.append(epoch_loss)
    return params, trace


def predict_candidates(params: ClassifierParams, doc_vector: np.ndarray, m: int) -> list[tuple[Topic, float]]:
    """Top-m topics by raw logit, ties broken by topic name ascending.

    Ranking by the raw logit is order-equivalent to ranking by probability
    (both links are strictly monotone) and immune to saturation.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    z = logits(params, doc_vector)[0]
    ranked = sorted(range(len(params.topics)), key=lambda j: (-z[j], params.topics[j].name))
    return [(params.topics[j], float(z[j])) for j in ranked[:m]]


# ---------------------------------------------------------------------------
# Checkpointing (manifest + raw float32 matrices, as in the embedding store)
# ---------------------------------------------------------------------------


def save_checkpoint(params: ClassifierParams, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    w_ids = [str(i) for i in range(params.dim)]
    save_matrix(EmbeddingMatrix(w_ids, params.w.astype(np.float32)), directory / "w.json")
    names = [t.name for t in params.topics]
    save_matrix(
        EmbeddingMatrix(names, params.topic_embeddings.astype(np.float32)),
        directory / "topics.json",
    )
    meta = {
        "dim": params.dim,
        "link": params.link,
        "logit_clamp": params.logit_clamp,
        "topic_ids": [t.id for t in params.topics],
    }
    with open(directory / "classifier.json", "w", encoding="utf-8") as f:
        json.dump(meta, f)


def load_checkpoint(directory: str | Path) -> ClassifierParams:
    directory = Path(directory)
    with open(directory / "classifier.json", encoding="utf-8") as f:
        meta = json.load(f)
    w = load_matrix(directory / "w.json")
    topic_mat = load_matrix(directory / "topics.json")
    topics = [Topic(tid, name) for tid, name in zip(meta["topic_ids"], topic_mat.ids)]
    return ClassifierParams(
        w.data.astype(np.float64),
        topic_mat.data.astype(np.float64),
        topics,
        link=meta["link"],
        logit_clamp=float(meta["logit_clamp"]),
    )
