"""Per-graph embeddings: normalized distance vectors over a support set.

A graph's embedding is the vector of its distances to a class-ordered
training subset, divided by their sum. Distances are delegated to a
caller-supplied pairwise function and memoized per unordered pair, so a
full embedding pass costs at most N * support-size evaluations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .datasets import GraphDataset
from .transport import load_distance_matrix, save_distance_matrix

__all__ = [
    "SupportSet",
    "MetricVector",
    "DistanceCache",
    "build_support_set",
    "metric_vector",
    "embed_all",
    "export_metric_matrix",
]


@dataclass(frozen=True)
class SupportSet:
    """Training ids grouped into contiguous class blocks, classes ascending."""

    ordered_ids: tuple[int, ...]
    class_offsets: tuple[int, ...]
    per_class_counts: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ordered_ids)

    def class_block(self, c: int) -> tuple[int, ...]:
        start = self.class_offsets[c]
        return self.ordered_ids[start : start + self.per_class_counts[c]]


@dataclass
class MetricVector:
    graph_id: int
    values: np.ndarray
    normalizer: float
    degenerate: bool = False


def build_support_set(train_ids, labels) -> SupportSet:
    """Sort train ids by (class, id) into class blocks covering every class."""
    ids = sorted(set(train_ids))
    k = max(labels) + 1
    present = {labels[i] for i in ids}
    missing = set(range(k)) - present
    if missing:
        raise ValueError(f"support set misses classes {sorted(missing)}")
    ordered = sorted(ids, key=lambda i: (labels[i], i))
    counts = [0] * k
    for i in ordered:
        counts[labels[i]] += 1
    offsets = [0] * k
    for c in range(1, k):
        offsets[c] = offsets[c - 1] + counts[c - 1]
    return SupportSet(tuple(ordered), tuple(offsets), tuple(counts))


def metric_vector(
    graph_id: int, support: SupportSet, distance_fn: Callable[[int, int], float]
) -> MetricVector:
    """Distances from one graph to every support member, sum-normalized.

    A zero distance sum (only possible in fully degenerate geometry) falls
    back to the uniform vector and sets the degeneracy flag.
    """
    raw = np.array([distance_fn(graph_id, j) for j in support.ordered_ids])
    sigma = float(raw.sum())
    if sigma > 0.0:
        return MetricVector(graph_id, raw / sigma, sigma)
    n = len(support)
    return MetricVector(graph_id, np.full(n, 1.0 / n), 0.0, degenerate=True)


@dataclass
class DistanceCache:
    """Unordered-pair distance memo, keyed by the parameters that shape it.

    ``params`` should identify dataset content and every upstream knob
    (min-sup, embedding dim and seed, regularization, iteration cap); a
    cache loaded under different parameters refuses to serve.
    """

    params: dict = field(default_factory=dict)
    values: dict[tuple[int, int], float] = field(default_factory=dict)
    nonconverged: set[tuple[int, int]] = field(default_factory=set)
    eval_count: int = 0

    def distance(self, i: int, j: int, fn: Callable[[int, int], float]) -> float:
        key = (i, j) if i <= j else (j, i)
        if key not in self.values:
            self.values[key] = fn(key[0], key[1])
            self.eval_count += 1
        return self.values[key]

    def flag_nonconverged(self, i: int, j: int) -> None:
        self.nonconverged.add((i, j) if i <= j else (j, i))

    def save(self, path: str | Path, n_graphs: int) -> None:
        matrix = np.full((n_graphs, n_graphs), np.nan)
        for (i, j), d in self.values.items():
            matrix[i, j] = d
            matrix[j, i] = d
        save_distance_matrix(path, matrix, self.params)

    @classmethod
    def load(cls, path: str | Path, expected_params: dict | None = None) -> "DistanceCache":
        matrix, params = load_distance_matrix(path)
        if expected_params is not None and params != expected_params:
            raise ValueError(
                f"cache parameter mismatch:\n  stored {params}\n  wanted {expected_params}"
            )
        cache = cls(params=params)
        n = matrix.shape[0]
        for i in range(n):
            for j in range(i, n):
                if not np.isnan(matrix[i, j]):
                    cache.values[(i, j)] = float(matrix[i, j])
        return cache


def embed_all(
    dataset: GraphDataset,
    support: SupportSet,
    distance_fn: Callable[[int, int], float],
    cache: DistanceCache | None = None,
    graph_ids=None,
) -> tuple[np.ndarray, list[MetricVector]]:
    """Metric vectors for every graph (or the given ids) as an (N, S) matrix."""
    if cache is None:
        cache = DistanceCache()
    ids = list(range(len(dataset))) if graph_ids is None else list(graph_ids)
    vectors = [
        metric_vector(i, support, lambda a, b: cache.distance(a, b, distance_fn))
        for i in ids
    ]
    matrix = np.stack([v.values for v in vectors])
    return matrix, vectors


def export_metric_matrix(
    path: str | Path, matrix: np.ndarray, labels, graph_ids=None
) -> None:
    """CSV rows (graph_id, label, v_1..v_S) for downstream tools."""
    ids = list(range(matrix.shape[0])) if graph_ids is None else list(graph_ids)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["graph_id", "label"] + [f"v_{k+1}" for k in range(matrix.shape[1])]
        )
        for row_idx, gid in enumerate(ids):
            writer.writerow(
                [gid, labels[gid]] + [f"{x:.17g}" for x in matrix[row_idx]]
            )
