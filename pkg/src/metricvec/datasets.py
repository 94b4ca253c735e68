"""Edge-list graph datasets: loading, validation, and deterministic splits.

Datasets are read from the plain-text format used by the common graph
classification benchmarks: a directory ``<DS>/`` holding ``<DS>_A.txt``
(global 1-based edge list), ``<DS>_graph_indicator.txt`` (node -> graph id),
``<DS>_graph_labels.txt`` and optionally ``<DS>_node_labels.txt``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "GraphDataset",
    "SplitConfig",
    "DatasetFormatError",
    "DatasetIntegrityError",
    "InfeasibleSplitError",
    "load_tudataset",
    "stratified_sample",
    "stratified_kfold",
]


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed (carries file and line number)."""


class DatasetIntegrityError(ValueError):
    """Dataset files are individually well-formed but mutually inconsistent."""


class InfeasibleSplitError(ValueError):
    """Requested split cannot cover every class."""


@dataclass(frozen=True)
class Graph:
    """One undirected node-labeled graph with local 0-based node indices."""

    id: int
    node_labels: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]  # each (u, v) with u < v, deduplicated

    def __post_init__(self) -> None:
        n = len(self.node_labels)
        if n < 1:
            raise DatasetIntegrityError(f"graph {self.id}: empty node set")
        for u, v in self.edges:
            if u == v:
                raise DatasetIntegrityError(f"graph {self.id}: self-loop at node {u}")
            if not (0 <= u < v < n):
                raise DatasetIntegrityError(
                    f"graph {self.id}: edge ({u}, {v}) out of range for {n} nodes"
                )

    @property
    def node_count(self) -> int:
        return len(self.node_labels)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.node_count
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


@dataclass(frozen=True)
class GraphDataset:
    """Ordered graphs plus contiguous class labels in [0, class_count)."""

    graphs: tuple[Graph, ...]
    labels: tuple[int, ...]
    class_count: int
    name: str = ""
    original_labels: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.graphs):
            raise DatasetIntegrityError(
                f"{len(self.labels)} labels for {len(self.graphs)} graphs"
            )
        present = set(self.labels)
        if present != set(range(self.class_count)):
            raise DatasetIntegrityError(
                f"labels must cover 0..{self.class_count - 1}, got {sorted(present)}"
            )

    def __len__(self) -> int:
        return len(self.graphs)

    def class_sizes(self) -> list[int]:
        sizes = [0] * self.class_count
        for y in self.labels:
            sizes[y] += 1
        return sizes

    def content_hash(self) -> str:
        """Stable digest of the dataset content, used to key distance caches."""
        h = hashlib.sha256()
        h.update(self.name.encode())
        for g, y in zip(self.graphs, self.labels):
            h.update(b"g")
            h.update(repr((y, g.node_labels, g.edges)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class SplitConfig:
    """Training/test sampling rates and the RNG seed that fixes the draw."""

    eta: float
    zeta: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not (0.0 < self.zeta <= 1.0):
            raise ValueError(f"zeta must be in (0, 1], got {self.zeta}")
        if self.eta + self.zeta > 1.0 + 1e-12:
            raise ValueError(f"eta + zeta must be <= 1, got {self.eta + self.zeta}")


def _read_int_row(path: Path, line_no: int, line: str, expect: int) -> list[int]:
    parts = line.replace(",", " ").split()
    if len(parts) != expect:
        raise DatasetFormatError(
            f"{path.name}:{line_no}: expected {expect} integers, got {line.strip()!r}"
        )
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise DatasetFormatError(
            f"{path.name}:{line_no}: non-integer field in {line.strip()!r}"
        ) from None


def _read_column(path: Path) -> list[int]:
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            values.append(_read_int_row(path, line_no, line, 1)[0])
    return values


def load_tudataset(directory: str | Path) -> GraphDataset:
    """Load a benchmark directory into a :class:`GraphDataset`.

    Graph labels are remapped to contiguous indices (ascending original
    value); the original values are retained on ``original_labels``.
    Duplicate and reversed edge rows are merged and self-loops dropped.
    A missing node-label file yields uniform node label 0.
    """
    directory = Path(directory)
    ds = directory.name
    a_path = directory / f"{ds}_A.txt"
    ind_path = directory / f"{ds}_graph_indicator.txt"
    lab_path = directory / f"{ds}_graph_labels.txt"
    nl_path = directory / f"{ds}_node_labels.txt"
    for p in (a_path, ind_path, lab_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing dataset file: {p}")

    indicator = _read_column(ind_path)  # node i (1-based) -> graph id (1-based)
    raw_graph_labels = _read_column(lab_path)
    n_nodes = len(indicator)
    n_graphs = len(raw_graph_labels)
    if max(indicator, default=0) > n_graphs or min(indicator, default=1) < 1:
        raise DatasetIntegrityError(
            f"{ind_path.name}: graph ids must lie in 1..{n_graphs}"
        )

    if nl_path.is_file():
        node_labels = _read_column(nl_path)
        if len(node_labels) != n_nodes:
            raise DatasetIntegrityError(
                f"{nl_path.name}: {len(node_labels)} node labels for {n_nodes} nodes"
            )
    else:
        node_labels = [0] * n_nodes

    # Partition nodes by graph, preserving file order within each graph.
    members: list[list[int]] = [[] for _ in range(n_graphs)]
    for node0, gid in enumerate(indicator):
        members[gid - 1].append(node0)
    local_of = {}
    for gid, nodes in enumerate(members):
        if not nodes:
            raise DatasetIntegrityError(f"graph {gid} has no nodes")
        for local, node0 in enumerate(nodes):
            local_of[node0] = (gid, local)

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(n_graphs)]
    with open(a_path) as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            i, j = _read_int_row(a_path, line_no, line, 2)
            if not (1 <= i <= n_nodes and 1 <= j <= n_nodes):
                raise DatasetIntegrityError(
                    f"{a_path.name}:{line_no}: node id out of range "
                    f"(have {n_nodes} indicator lines)"
                )
            gi, u = local_of[i - 1]
            gj, v = local_of[j - 1]
            if gi != gj:
                raise DatasetIntegrityError(
                    f"{a_path.name}:{line_no}: edge crosses graphs {gi} and {gj}"
                )
            if u == v:
                continue
            edge_sets[gi].add((min(u, v), max(u, v)))

    distinct = sorted(set(raw_graph_labels))
    remap = {orig: k for k, orig in enumerate(distinct)}
    graphs = tuple(
        Graph(
            id=gid,
            node_labels=tuple(node_labels[n] for n in members[gid]),
            edges=tuple(sorted(edge_sets[gid])),
        )
        for gid in range(n_graphs)
    )
    return GraphDataset(
        graphs=graphs,
        labels=tuple(remap[y] for y in raw_graph_labels),
        class_count=len(distinct),
        name=ds,
        original_labels=tuple(raw_graph_labels),
    )


def _largest_remainder(total: int, weights: list[int], minimum: int = 0) -> list[int]:
    """Integer apportionment of ``total`` proportional to ``weights``.

    Floors the exact quotas, hands out the remainder by largest fractional
    part (ties to lower index), then enforces ``minimum`` per cell by taking
    from the largest cells.
    """
    s = sum(weights)
    quotas = [total * w / s for w in weights]
    counts = [int(q) for q in quotas]
    remainder = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:remainder]:
        counts[k] += 1
    while any(c < minimum for c in counts):
        lo = min(range(len(counts)), key=lambda k: counts[k])
        hi = max(range(len(counts)), key=lambda k: (counts[k], -k))
        if counts[hi] <= minimum:
            raise InfeasibleSplitError(
                f"cannot give every class at least {minimum} of {total} items"
            )
        counts[lo] += 1
        counts[hi] -= 1
    return counts


def _ids_by_class(labels, ids=None) -> dict[int, list[int]]:
    pool = range(len(labels)) if ids is None else ids
    by_class: dict[int, list[int]] = {}
    for i in pool:
        by_class.setdefault(labels[i], []).append(i)
    return by_class


def stratified_sample(
    dataset: GraphDataset, config: SplitConfig
) -> tuple[list[int], list[int]]:
    """Draw disjoint train/test id lists at rates eta and zeta.

    Train counts follow class frequencies by largest-remainder rounding with
    at least one item per class; the test sample is drawn from the remainder
    at rate zeta, also stratified (without the minimum-one guarantee).
    """
    n = len(dataset)
    k = dataset.class_count
    n_train = int(round(config.eta * n))
    if config.eta * n < k:
        raise InfeasibleSplitError(
            f"eta={config.eta} gives {config.eta * n:.2f} training items "
            f"for {k} classes"
        )
    n_train = max(n_train, k)
    sizes = dataset.class_sizes()
    train_counts = _largest_remainder(n_train, sizes, minimum=1)

    rng = np.random.default_rng(config.seed)
    by_class = _ids_by_class(dataset.labels)
    train_ids: list[int] = []
    rest_by_class: dict[int, list[int]] = {}
    for c in range(k):
        ids = np.array(by_class[c])
        perm = rng.permutation(len(ids))
        take = train_counts[c]
        train_ids.extend(int(i) for i in ids[perm[:take]])
        rest_by_class[c] = [int(i) for i in ids[perm[take:]]]

    n_test = int(round(config.zeta * n))
    n_rest = sum(len(v) for v in rest_by_class.values())
    n_test = min(n_test, n_rest)
    test_ids: list[int] = []
    if n_test > 0:
        weights = [max(len(rest_by_class[c]), 0) for c in range(k)]
        test_counts = _largest_remainder(n_test, [w if w else 1 for w in weights])
        for c in range(k):
            take = min(test_counts[c], len(rest_by_class[c]))
            test_ids.extend(rest_by_class[c][:take])
    return sorted(train_ids), sorted(test_ids)


def stratified_kfold(
    dataset: GraphDataset, k: int, seed: int = 0
) -> list[tuple[list[int], list[int]]]:
    """Split into k stratified folds; returns (train_ids, test_ids) per fold.

    Per class, members are shuffled and dealt in blocks of size
    floor(n_c / k) with the n_c mod k extras assigned to consecutive folds
    starting where the previous class stopped, keeping every fold's size
    within one item of N / k.
    """
    n = len(dataset)
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} graphs")
    rng = np.random.default_rng(seed)
    fold_members: list[list[int]] = [[] for _ in range(k)]
    by_class = _ids_by_class(dataset.labels)
    extra_offset = 0
    for c in sorted(by_class):
        ids = np.array(by_class[c])
        perm = rng.permutation(len(ids))
        shuffled = [int(i) for i in ids[perm]]
        base, extra = divmod(len(shuffled), k)
        counts = [base] * k
        for j in range(extra):
            counts[(extra_offset + j) % k] += 1
        extra_offset = (extra_offset + extra) % k
        pos = 0
        for f in range(k):
            fold_members[f].extend(shuffled[pos : pos + counts[f]])
            pos += counts[f]
    folds = []
    for f in range(k):
        test = sorted(fold_members[f])
        test_set = set(test)
        train = [i for i in range(n) if i not in test_set]
        folds.append((train, test))
    return folds
