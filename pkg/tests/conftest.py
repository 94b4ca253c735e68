"""Shared fixtures: synthetic datasets, TU-format directory writer, data lookup."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from metricvec.datasets import Graph, GraphDataset


def write_tu_dir(root: Path, name: str, graphs, labels, node_labels=True) -> Path:
    """Materialize a list of (node_labels, edges) graphs as a TU-format dir."""
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    a_lines = []
    ind_lines = []
    nl_lines = []
    offset = 0
    for gid, (nls, edges) in enumerate(graphs, start=1):
        for nl in nls:
            ind_lines.append(f"{gid}\n")
            nl_lines.append(f"{nl}\n")
        for u, v in edges:
            a_lines.append(f"{offset + u + 1}, {offset + v + 1}\n")
            a_lines.append(f"{offset + v + 1}, {offset + u + 1}\n")
        offset += len(nls)
    (d / f"{name}_A.txt").write_text("".join(a_lines))
    (d / f"{name}_graph_indicator.txt").write_text("".join(ind_lines))
    (d / f"{name}_graph_labels.txt").write_text("".join(f"{y}\n" for y in labels))
    if node_labels:
        (d / f"{name}_node_labels.txt").write_text("".join(nl_lines))
    return d


def make_dataset(graph_specs, labels, name="synthetic") -> GraphDataset:
    graphs = tuple(
        Graph(id=i, node_labels=tuple(nls), edges=tuple(sorted(set(edges))))
        for i, (nls, edges) in enumerate(graph_specs)
    )
    return GraphDataset(
        graphs=graphs,
        labels=tuple(labels),
        class_count=max(labels) + 1,
        name=name,
    )


def motif_dataset(n_per_class=12, seed=0) -> GraphDataset:
    """Two classes separable by which label decorates a shared backbone.

    Class 0 graphs carry a triangle of label-1 nodes, class 1 graphs a
    path of label-2 nodes; both hang off a common label-0 chain whose
    length varies, so topology alone does not give the class away.
    """
    rng = np.random.default_rng(seed)
    specs = []
    labels = []
    for cls in (0, 1):
        for _ in range(n_per_class):
            chain = int(rng.integers(3, 6))
            nls = [0] * chain
            edges = [(i, i + 1) for i in range(chain - 1)]
            base = chain
            if cls == 0:
                nls += [1, 1, 1]
                edges += [
                    (base, base + 1),
                    (base + 1, base + 2),
                    (base, base + 2),
                    (0, base),
                ]
            else:
                nls += [2, 2, 2]
                edges += [(base, base + 1), (base + 1, base + 2), (0, base)]
            specs.append((nls, edges))
            labels.append(cls)
    return make_dataset(specs, labels, name="motifs")


def molecule_like_dataset(n_graphs=60, seed=0, n_labels=4) -> GraphDataset:
    """Sparse random graphs at benchmark scale for timing-sensitive tests."""
    rng = np.random.default_rng(seed)
    specs = []
    labels = []
    for _ in range(n_graphs):
        n = int(rng.integers(10, 20))
        nls = [int(x) for x in rng.integers(0, n_labels, size=n)]
        edges = {(i, i + 1) for i in range(n - 1)}  # spine keeps it connected
        for _ in range(n // 3):
            u, v = rng.integers(0, n, size=2)
            if u != v:
                edges.add((min(u, v), max(u, v)))
        specs.append((nls, sorted(edges)))
        labels.append(int(rng.integers(0, 2)))
    # ensure both classes appear
    labels[0], labels[1] = 0, 1
    return make_dataset(specs, labels, name="molecule_like")


@pytest.fixture
def motifs() -> GraphDataset:
    return motif_dataset()


def mutag_dir() -> Path | None:
    """Locate the MUTAG benchmark directory, if the files are present."""
    candidates = []
    env = os.environ.get("METRICVEC_DATA_DIR")
    if env:
        candidates.append(Path(env) / "MUTAG")
    candidates.append(Path(__file__).resolve().parents[1] / "data" / "MUTAG")
    for c in candidates:
        if (c / "MUTAG_A.txt").is_file():
            return c
    return None
