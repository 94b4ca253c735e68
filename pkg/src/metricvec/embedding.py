"""Fragment and graph vectors learned with a distributed bag-of-fragments model.

Each graph is a document whose tokens are the fragments of its
decomposition. The document vector is trained to score its own fragments
above negatively sampled ones; the full softmax is replaced by negative
sampling, with the exact softmax objective kept around as a test oracle
for tiny vocabularies.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import GraphDataset
from .fragments import FragmentDecomposition

__all__ = [
    "EmbedConfig",
    "EmbeddingTable",
    "VectorSet",
    "TrainingError",
    "train_pvdbow",
    "embed_decomposition",
    "softmax_log_likelihood",
    "save_table",
    "load_table",
]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 16
    epochs: int = 100
    negatives: int = 5
    lr_start: float = 0.025
    lr_end: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {self.negatives}")
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError("need lr_start >= lr_end > 0")


@dataclass
class EmbeddingTable:
    """Trained vectors: one row per fragment id and one per graph id."""

    fragment_vectors: np.ndarray  # (n_fragments, dim)
    graph_vectors: np.ndarray  # (n_graphs, dim)
    epoch_losses: list[float]

    @property
    def dim(self) -> int:
        return self.fragment_vectors.shape[1]


@dataclass(frozen=True)
class VectorSet:
    """A graph's point cloud: one point per fragment of its decomposition."""

    graph_id: int
    points: np.ndarray  # (n_points, dim)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def triple_loss(graph_vec, target_vec, negative_vecs) -> float:
    """Negative-sampling loss for one (graph, fragment, negatives) triple."""
    pos = float(np.dot(graph_vec, target_vec))
    negs = negative_vecs @ graph_vec
    return -float(np.log(_sigmoid(pos)) + np.sum(np.log(_sigmoid(-negs))))


def triple_grads(graph_vec, target_vec, negative_vecs):
    """Analytic gradients of :func:`triple_loss` w.r.t. all three arguments."""
    pos_err = _sigmoid(float(np.dot(graph_vec, target_vec))) - 1.0
    neg_err = _sigmoid(negative_vecs @ graph_vec)  # (negatives,)
    g_graph = pos_err * target_vec + neg_err @ negative_vecs
    g_target = pos_err * graph_vec
    g_negs = neg_err[:, None] * graph_vec[None, :]
    return g_graph, g_target, g_negs


def train_pvdbow(
    dataset: GraphDataset,
    decompositions: list[FragmentDecomposition],
    config: EmbedConfig,
    n_fragments: int | None = None,
) -> EmbeddingTable:
    """Train fragment and graph vectors by seeded single-threaded SGD.

    Negatives are drawn from the fragment unigram distribution raised to
    0.75; the learning rate decays linearly from lr_start to lr_end over
    all updates. Identical inputs and seed give bit-identical tables.
    """
    n_graphs = len(dataset)
    docs = [sorted(d.fragment_ids) for d in decompositions]
    if n_fragments is None:
        n_fragments = max((max(d) for d in docs if d), default=-1) + 1
    total_tokens = sum(len(d) for d in docs)
    if total_tokens == 0 or n_fragments == 0:
        raise TrainingError("every decomposition is empty; nothing to train on")

    rng = np.random.default_rng(config.seed)
    span = 1.0 / config.dim
    frag_vecs = rng.uniform(-0.5 * span, 0.5 * span, size=(n_fragments, config.dim))
    graph_vecs = rng.uniform(-0.5 * span, 0.5 * span, size=(n_graphs, config.dim))

    counts = np.zeros(n_fragments)
    for doc in docs:
        for f in doc:
            counts[f] += 1
    noise = counts**0.75
    noise /= noise.sum()

    doc_ids = [g for g, doc in enumerate(docs) if doc]
    total_updates = config.epochs * total_tokens
    update = 0
    epoch_losses: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(doc_ids))
        epoch_loss = 0.0
        for k in order:
            g = doc_ids[k]
            v_g = graph_vecs[g]
            for target in docs[g]:
                lr = config.lr_start + (config.lr_end - config.lr_start) * (
                    update / max(total_updates - 1, 1)
                )
                update += 1
                # Redraw collisions with the target so every update sees the
                # configured number of negatives (unless the vocabulary is
                # exhausted by the target itself).
                negs = rng.choice(n_fragments, size=config.negatives, p=noise)
                for _ in range(4):
                    hit = negs == target
                    if not hit.any():
                        break
                    negs[hit] = rng.choice(n_fragments, size=int(hit.sum()), p=noise)
                negs = negs[negs != target]
                u_t = frag_vecs[target]
                u_n = frag_vecs[negs]
                epoch_loss += triple_loss(v_g, u_t, u_n)
                g_graph, g_target, g_negs = triple_grads(v_g, u_t, u_n)
                frag_vecs[target] -= lr * g_target
                np.add.at(frag_vecs, negs, -lr * g_negs)  # accumulate duplicate draws
                v_g -= lr * g_graph
        epoch_losses.append(epoch_loss / total_tokens)
    return EmbeddingTable(
        fragment_vectors=frag_vecs, graph_vectors=graph_vecs, epoch_losses=epoch_losses
    )


def softmax_log_likelihood(
    table: EmbeddingTable, decompositions: list[FragmentDecomposition]
) -> float:
    """Exact full-softmax log likelihood; oracle for small vocabularies."""
    scores = table.graph_vectors @ table.fragment_vectors.T  # (n_graphs, n_frag)
    log_z = np.log(np.exp(scores - scores.max(axis=1, keepdims=True)).sum(axis=1))
    log_z += scores.max(axis=1)
    total = 0.0
    for d in decompositions:
        for f in sorted(d.fragment_ids):
            total += scores[d.graph_id, f] - log_z[d.graph_id]
    return float(total)


def embed_decomposition(
    decomposition: FragmentDecomposition, table: EmbeddingTable
) -> VectorSet:
    """Point cloud of the decomposition's fragment vectors, id-ascending.

    An empty decomposition falls back to the single point given by the
    graph's own document vector.
    """
    ids = sorted(decomposition.fragment_ids)
    if not ids:
        point = table.graph_vectors[decomposition.graph_id]
        return VectorSet(decomposition.graph_id, np.array([point]))
    if ids[-1] >= table.fragment_vectors.shape[0] or ids[0] < 0:
        raise KeyError(
            f"fragment id {ids[-1]} not in table of "
            f"{table.fragment_vectors.shape[0]} fragments"
        )
    return VectorSet(decomposition.graph_id, table.fragment_vectors[ids].copy())


def save_table(path: str | Path, table: EmbeddingTable) -> None:
    """Text format: header 'dim n_frag n_graph', then 'id v1 .. v_dim' lines."""
    nf = table.fragment_vectors.shape[0]
    ng = table.graph_vectors.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{table.dim} {nf} {ng}\n")
        for i in range(nf):
            row = " ".join(f"{x:.17g}" for x in table.fragment_vectors[i])
            fh.write(f"{i} {row}\n")
        for i in range(ng):
            row = " ".join(f"{x:.17g}" for x in table.graph_vectors[i])
            fh.write(f"{i} {row}\n")


def load_table(path: str | Path) -> EmbeddingTable:
    with open(path) as fh:
        dim, nf, ng = (int(x) for x in fh.readline().split())
        frag = np.empty((nf, dim))
        graph = np.empty((ng, dim))
        for block, count in ((frag, nf), (graph, ng)):
            for _ in range(count):
                parts = fh.readline().split()
                block[int(parts[0])] = [float(x) for x in parts[1:]]
    return EmbeddingTable(fragment_vectors=frag, graph_vectors=graph, epoch_losses=[])
