"""Frequent connected-substructure mining over node-labeled graphs.

Fragments are connected subgraphs identified up to label-preserving
isomorphism by a minimal DFS code. Mining grows fragments edge by edge,
level per level, pruning with the anti-monotone support property: a
fragment can only be frequent if some one-edge-smaller connected
sub-fragment is.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .datasets import Graph, GraphDataset

__all__ = [
    "Fragment",
    "MiningConfig",
    "FragmentDecomposition",
    "canonical_code",
    "mine_frequent_fragments",
    "mine_with_decompositions",
    "support",
    "decompose",
    "contains_subgraph",
    "save_fragments",
    "load_fragments",
]

# A code is a tuple of (step, from_idx, to_idx, from_label, to_label) rows;
# indices are DFS discovery positions, so equal codes mean isomorphic graphs.
Code = tuple[tuple[int, int, int, int, int], ...]


@dataclass(frozen=True)
class Fragment:
    code: Code
    node_count: int
    edge_count: int

    def __post_init__(self) -> None:
        if self.edge_count < 1:
            raise ValueError("fragments must have at least one edge")

    def to_graph(self) -> tuple[tuple[int, ...], tuple[tuple[int, int], ...]]:
        """Rebuild (node_labels, edges) from the code, vertices in DFS order."""
        labels: dict[int, int] = {}
        edges = []
        for _, i, j, li, lj in self.code:
            labels[i] = li
            labels[j] = lj
            edges.append((min(i, j), max(i, j)))
        n = max(labels) + 1
        return tuple(labels[v] for v in range(n)), tuple(sorted(edges))


@dataclass(frozen=True)
class MiningConfig:
    theta: float = 0.5
    max_edges: int = 5

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if self.max_edges < 1:
            raise ValueError(f"max_edges must be >= 1, got {self.max_edges}")


@dataclass(frozen=True)
class FragmentDecomposition:
    graph_id: int
    fragment_ids: frozenset[int]


def _adjacency(node_labels, edges) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in node_labels]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return adj


def _is_connected(n: int, adj: list[list[int]]) -> bool:
    if n == 0:
        return False
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def canonical_code(node_labels, edges) -> Code:
    """Minimal DFS code of a connected node-labeled graph.

    Enumerates every depth-first traversal (all roots, all extension
    orders along the rightmost path), emitting back-edges of each newly
    discovered vertex immediately in ascending discovery order, and keeps
    the lexicographically smallest edge sequence. Exact: two graphs get
    equal codes iff they are label-preserving isomorphic.
    """
    node_labels = tuple(node_labels)
    n = len(node_labels)
    edge_set = {(min(u, v), max(u, v)) for u, v in edges}
    adj = _adjacency(node_labels, edge_set)
    if not _is_connected(n, adj):
        raise ValueError("canonical_code requires a connected graph")
    if not edge_set:
        # Single-vertex graph: degenerate one-row code keyed by the label.
        return ((0, 0, 0, node_labels[0], node_labels[0]),)

    m = len(edge_set)
    best: list[tuple[int, int, int, int, int]] | None = None

    def explore(order: dict[int, int], path: list[int], used: set, code: list) -> None:
        nonlocal best
        if best is not None:
            # Prefix pruning against the best complete code found so far.
            k = len(code)
            if code and tuple(code) > tuple(best[:k]):
                return
        if len(code) == m:
            if best is None or code < best:
                best = list(code)
            return
        # Forward extension from each vertex on the rightmost path, deepest
        # first; extending from an ancestor pops everything deeper.
        for depth in range(len(path) - 1, -1, -1):
            a = path[depth]
            ia = order[a]
            for b in adj[a]:
                if b in order:
                    continue
                e = (min(a, b), max(a, b))
                if e in used:
                    continue
                ib = len(order)
                order[b] = ib
                used.add(e)
                step = len(code)
                code.append((step, ia, ib, node_labels[a], node_labels[b]))
                # Back-edges from the new vertex are forced, in ascending
                # target order, before any further forward growth.
                back = sorted(
                    order[c]
                    for c in adj[b]
                    if c in order and (min(b, c), max(b, c)) not in used
                )
                back_edges = []
                inv = {idx: v for v, idx in order.items()}
                for ic in back:
                    c = inv[ic]
                    eb = (min(b, c), max(b, c))
                    used.add(eb)
                    back_edges.append(eb)
                    code.append(
                        (len(code), ib, ic, node_labels[b], node_labels[c])
                    )
                explore(order, path[: depth + 1] + [b], used, code)
                for eb in reversed(back_edges):
                    used.remove(eb)
                    code.pop()
                code.pop()
                used.remove(e)
                del order[b]

    for root in range(n):
        if not adj[root]:
            continue
        explore({root: 0}, [root], set(), [])
    assert best is not None
    return tuple(best)


def contains_subgraph(graph: Graph, fragment: Fragment) -> bool:
    """Exact label-preserving subgraph-isomorphism test by backtracking.

    Prunes candidates by node label and degree; fragment vertices are
    matched in DFS-code order so each new vertex is adjacent to an
    already-matched one.
    """
    f_labels, f_edges = fragment.to_graph()
    nf = len(f_labels)
    if nf > graph.node_count or fragment.edge_count > graph.edge_count:
        return False
    f_adj = _adjacency(f_labels, f_edges)
    g_adj = _adjacency(graph.node_labels, graph.edges)
    g_adjset = [set(a) for a in g_adj]
    g_deg = graph.degrees()
    f_deg = [len(a) for a in f_adj]

    # DFS-code vertex order guarantees connectivity of every prefix.
    cand0 = [
        v
        for v in range(graph.node_count)
        if graph.node_labels[v] == f_labels[0] and g_deg[v] >= f_deg[0]
    ]

    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(u: int) -> bool:
        if u == nf:
            return True
        anchors = [w for w in f_adj[u] if w < u]
        pool = g_adjset[mapping[anchors[0]]]
        for v in pool:
            if v in used:
                continue
            if graph.node_labels[v] != f_labels[u] or g_deg[v] < f_deg[u]:
                continue
            if any(mapping[w] not in g_adjset[v] for w in anchors):
                continue
            mapping[u] = v
            used.add(v)
            if extend(u + 1):
                return True
            used.remove(v)
            del mapping[u]
        return False

    for v0 in cand0:
        mapping[0] = v0
        used.add(v0)
        if extend(1):
            return True
        used.remove(v0)
        mapping.clear()
    return False


def support(fragment: Fragment, dataset: GraphDataset) -> float:
    """Fraction of dataset graphs containing the fragment."""
    hits = sum(1 for g in dataset.graphs if contains_subgraph(g, fragment))
    return hits / len(dataset)


def _subset_code(graph: Graph, edge_ids: frozenset[int]) -> Code:
    verts = sorted({v for e in edge_ids for v in graph.edges[e]})
    local = {v: i for i, v in enumerate(verts)}
    labels = tuple(graph.node_labels[v] for v in verts)
    edges = [(local[u], local[v]) for u, v in (graph.edges[e] for e in edge_ids)]
    return canonical_code(labels, edges)


def mine_with_decompositions(
    dataset: GraphDataset, config: MiningConfig
) -> tuple[list[Fragment], list[float], list[FragmentDecomposition]]:
    """Mine frequent fragments and each graph's decomposition in one pass.

    Level k+1 candidates are the one-edge extensions of level-k occurrences
    of frequent codes only (anti-monotone pruning); occurrences are tracked
    as edge subsets per graph, deduplicated, so support counts graph-level
    presence exactly once.
    """
    if len(dataset) == 0:
        raise ValueError("cannot mine an empty dataset")
    n = len(dataset)
    incident: list[list[list[int]]] = []  # per graph: vertex -> incident edge ids
    for g in dataset.graphs:
        inc: list[list[int]] = [[] for _ in range(g.node_count)]
        for e, (u, v) in enumerate(g.edges):
            inc[u].append(e)
            inc[v].append(e)
        incident.append(inc)

    frequent: dict[Code, set[int]] = {}  # code -> supporting graph ids
    # Per graph, current level's subsets of frequent codes.
    current: list[dict[frozenset[int], Code]] = []
    level_occ: dict[Code, set[int]] = {}
    for gid, g in enumerate(dataset.graphs):
        subsets: dict[frozenset[int], Code] = {}
        for e in range(g.edge_count):
            key = frozenset((e,))
            code = _subset_code(g, key)
            subsets[key] = code
            level_occ.setdefault(code, set()).add(gid)
        current.append(subsets)

    for level in range(1, config.max_edges + 1):
        surviving = {
            code: gids
            for code, gids in level_occ.items()
            if len(gids) / n >= config.theta
        }
        frequent.update(surviving)
        if level == config.max_edges or not surviving:
            break
        level_occ = {}
        nxt: list[dict[frozenset[int], Code]] = []
        for gid, g in enumerate(dataset.graphs):
            subsets: dict[frozenset[int], Code] = {}
            seen: set[frozenset[int]] = set()
            for key, code in current[gid].items():
                if code not in surviving:
                    continue
                verts = {v for e in key for v in g.edges[e]}
                for v in verts:
                    for e in incident[gid][v]:
                        if e in key:
                            continue
                        grown = key | {e}
                        if grown in seen:
                            continue
                        seen.add(grown)
                        gcode = _subset_code(g, grown)
                        subsets[grown] = gcode
                        level_occ.setdefault(gcode, set()).add(gid)
            nxt.append(subsets)
        current = nxt

    codes = sorted(frequent)
    fragments = []
    supports = []
    for code in codes:
        nodes = len({idx for _, i, j, _, _ in code for idx in (i, j)})
        fragments.append(Fragment(code=code, node_count=nodes, edge_count=len(code)))
        supports.append(len(frequent[code]) / n)
    index_of = {code: i for i, code in enumerate(codes)}
    decomps = []
    for gid in range(n):
        ids = frozenset(
            index_of[code] for code, gids in frequent.items() if gid in gids
        )
        decomps.append(FragmentDecomposition(graph_id=gid, fragment_ids=ids))
    return fragments, supports, decomps


def mine_frequent_fragments(
    dataset: GraphDataset, config: MiningConfig
) -> list[Fragment]:
    fragments, _, _ = mine_with_decompositions(dataset, config)
    return fragments


def decompose(graph: Graph, frequent_fragments: list[Fragment]) -> FragmentDecomposition:
    """Ids of all frequent fragments contained in the graph (exact test)."""
    ids = frozenset(
        i for i, f in enumerate(frequent_fragments) if contains_subgraph(graph, f)
    )
    return FragmentDecomposition(graph_id=graph.id, fragment_ids=ids)


def _format_code(code: Code) -> str:
    return " ".join(",".join(str(x) for x in row) for row in code)


def _parse_code(text: str) -> Code:
    rows = []
    for part in text.split():
        fields = part.split(",")
        if len(fields) != 5:
            raise ValueError(f"malformed code row {part!r}")
        rows.append(tuple(int(x) for x in fields))
    return tuple(rows)  # type: ignore[return-value]


def save_fragments(path: str | Path, fragments: list[Fragment], supports: list[float]) -> None:
    """One fragment per line: support value then the code rows; round-trips exactly."""
    with open(path, "w") as fh:
        for frag, supp in zip(fragments, supports):
            fh.write(f"{supp!r}\t{_format_code(frag.code)}\n")


def load_fragments(path: str | Path) -> tuple[list[Fragment], list[float]]:
    fragments = []
    supports = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            supp_text, code_text = line.rstrip("\n").split("\t")
            code = _parse_code(code_text)
            nodes = len({idx for _, i, j, _, _ in code for idx in (i, j)})
            fragments.append(
                Fragment(code=code, node_count=nodes, edge_count=len(code))
            )
            supports.append(float(supp_text))
    return fragments, supports
