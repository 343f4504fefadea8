"""Immutable typed graphs and seeded train/valid/test partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rng import SplitMix64


class GraphError(ValueError):
    """Malformed graph input."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected typed graph with node features, stored in CSR form.

    ``edges`` holds each undirected edge once as ``(u, v)`` with ``u < v``,
    sorted lexicographically; ``edge_type[e]`` is the type of ``edges[e]``.
    ``indptr``/``indices`` give symmetric, sorted neighbor lists and
    ``adj_edge[p]`` maps each directed slot back to its edge index.
    """

    num_nodes: int
    edges: np.ndarray
    edge_type: np.ndarray
    node_type: np.ndarray
    features: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    adj_edge: np.ndarray
    node_type_names: tuple[str, ...] = ("default",)
    edge_type_names: tuple[str, ...] = ("default",)
    duplicates_dropped: int = 0

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_node_types(self) -> int:
        return len(self.node_type_names)

    @property
    def num_edge_types(self) -> int:
        return len(self.edge_type_names)

    @property
    def is_heterogeneous(self) -> bool:
        return self.num_node_types + self.num_edge_types > 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        if not 0 <= u < self.num_nodes:
            raise IndexError(f"node {u} out of range [0, {self.num_nodes})")
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        pos = np.searchsorted(nbrs, v)
        return bool(pos < len(nbrs) and nbrs[pos] == v)

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * N + v`` keys for both orientations of every edge."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.indptr))
        return rows * self.num_nodes + self.indices

    def edges_of_type(self, r: int) -> np.ndarray:
        return self.edges[self.edge_type == r]


def build_graph(
    edges: Iterable[Sequence[int]],
    node_types: Sequence[int] | np.ndarray | int,
    features: np.ndarray,
    node_type_names: Sequence[str] | None = None,
    edge_type_names: Sequence[str] | None = None,
) -> Graph:
    """Canonicalize an edge list into a :class:`Graph`.

    ``edges`` items are ``(u, v)`` or ``(u, v, edge_type)``. ``node_types`` is
    either one type id per node or a node count (single type). Reversed and
    repeated pairs collapse to one edge; a repeated pair keeps the smallest
    edge type seen, and the number of dropped copies lands in
    ``duplicates_dropped``. Self-loops are rejected.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if isinstance(node_types, (int, np.integer)):
        n = int(node_types)
        ntype = np.zeros(n, dtype=np.int64)
    else:
        ntype = np.asarray(node_types, dtype=np.int64).reshape(-1)
        n = len(ntype)
    if features.shape[0] != n:
        raise GraphError(f"features have {features.shape[0]} rows but graph has {n} nodes")
    if not np.isfinite(features).all():
        raise GraphError("features contain non-finite values")
    if n and ntype.min() < 0:
        raise GraphError("negative node type id")

    raw = [tuple(int(x) for x in e) for e in edges]
    arr = np.array([(e[0], e[1], e[2] if len(e) > 2 else 0) for e in raw], dtype=np.int64)
    arr = arr.reshape(-1, 3)
    if len(arr):
        bad = (arr[:, :2] < 0) | (arr[:, :2] >= n)
        if bad.any():
            row = int(np.argmax(bad.any(axis=1)))
            raise GraphError(f"edge {tuple(arr[row, :2])} references a node outside [0, {n})")
        loops = arr[:, 0] == arr[:, 1]
        if loops.any():
            row = int(np.argmax(loops))
            raise GraphError(f"self-loop on node {arr[row, 0]} is not allowed")
        if arr[:, 2].min() < 0:
            raise GraphError("negative edge type id")

    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    order = np.lexsort((arr[:, 2], hi, lo))
    lo, hi, et = lo[order], hi[order], arr[order, 2]
    keep = np.ones(len(lo), dtype=bool)
    keep[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    canon = np.stack([lo[keep], hi[keep]], axis=1)
    etype = et[keep]

    n_ntypes = int(ntype.max()) + 1 if n else 1
    n_etypes = int(etype.max()) + 1 if len(etype) else 1
    if node_type_names is None:
        node_type_names = ["default"] if n_ntypes == 1 else [str(t) for t in range(n_ntypes)]
    if edge_type_names is None:
        edge_type_names = ["default"] if n_etypes == 1 else [str(t) for t in range(n_etypes)]
    if len(node_type_names) < n_ntypes or len(edge_type_names) < n_etypes:
        raise GraphError("fewer type names than type ids in use")

    return _from_canonical(
        n, canon, etype, ntype, features,
        tuple(node_type_names), tuple(edge_type_names), int((~keep).sum()),
    )


def _from_canonical(n, edges, etype, ntype, features, ntnames, etnames, dropped=0) -> Graph:
    m = len(edges)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Graph(
        num_nodes=n,
        edges=edges.astype(np.int64).reshape(-1, 2),
        edge_type=etype.astype(np.int64),
        node_type=ntype.astype(np.int64),
        features=features,
        indptr=indptr,
        indices=dst[order].astype(np.int64),
        adj_edge=eid[order].astype(np.int64),
        node_type_names=ntnames,
        edge_type_names=etnames,
        duplicates_dropped=dropped,
    )


def neighbors(g: Graph, u: int) -> np.ndarray:
    return g.neighbors(u)


def remove_nodes(g: Graph, drop: Iterable[int]) -> tuple[Graph, np.ndarray]:
    """Drop nodes and their incident edges, compacting the survivors.

    Returns the new graph and ``remap`` of length ``g.num_nodes`` with the new
    id of every old node, or -1 for dropped ones.
    """
    drop = np.unique(np.asarray(list(drop), dtype=np.int64))
    if len(drop) and (drop.min() < 0 or drop.max() >= g.num_nodes):
        raise GraphError("drop set contains ids outside the graph")
    if len(drop) == g.num_nodes and g.num_nodes > 0:
        raise GraphError("cannot drop every node")
    alive = np.ones(g.num_nodes, dtype=bool)
    alive[drop] = False
    remap = np.full(g.num_nodes, -1, dtype=np.int64)
    remap[alive] = np.arange(int(alive.sum()))
    keep = alive[g.edges[:, 0]] & alive[g.edges[:, 1]]
    new_edges = remap[g.edges[keep]]
    sub = _from_canonical(
        int(alive.sum()), new_edges, g.edge_type[keep], g.node_type[alive],
        g.features[alive], g.node_type_names, g.edge_type_names,
    )
    return sub, remap


def induced_edge_subgraph(g: Graph, edge_mask: np.ndarray) -> Graph:
    """Same node set, only the edges selected by ``edge_mask``."""
    return _from_canonical(
        g.num_nodes, g.edges[edge_mask], g.edge_type[edge_mask], g.node_type,
        g.features, g.node_type_names, g.edge_type_names,
    )


# --- splits -----------------------------------------------------------------

INDUCTIVE = "inductive-node"
TRANSDUCTIVE = "transductive-edge"


@dataclass(frozen=True)
class SplitSpec:
    mode: str = INDUCTIVE
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    inductive_node_type: int | None = None

    def __post_init__(self):
        if self.mode not in (INDUCTIVE, TRANSDUCTIVE):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if len(self.fractions) != 3 or min(self.fractions) <= 0:
            raise ValueError("fractions must be three positive numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(self.fractions)}, expected 1")


@dataclass(frozen=True, eq=False)
class EvalItems:
    """Held-out evaluation material, in ids of the full graph.

    For inductive splits ``nodes`` are the newcomers and every row of
    ``edges`` is ``(newcomer, train node)``. Transductive splits leave
    ``nodes`` empty.
    """

    nodes: np.ndarray
    edges: np.ndarray


@dataclass(frozen=True, eq=False)
class Split:
    spec: SplitSpec
    graph: Graph
    train_graph: Graph
    train_nodes: np.ndarray
    remap: np.ndarray
    valid: EvalItems
    test: EvalItems
    dropped_pairs: int = field(default=0)

    @property
    def inductive(self) -> bool:
        return self.spec.mode == INDUCTIVE


def _bucket_sizes(total: int, fractions) -> tuple[int, int, int]:
    n_valid = math.floor(total * fractions[1] + 0.5)
    n_test = math.floor(total * fractions[2] + 0.5)
    return total - n_valid - n_test, n_valid, n_test


def make_split(g: Graph, spec: SplitSpec) -> Split:
    """Partition ``g`` into train/valid/test under a seeded shuffle.

    Inductive mode holds out whole nodes: their edges to train nodes become
    evaluation positives and edges among held-out nodes are discarded
    (counted in ``dropped_pairs``). Transductive mode holds out edges and
    keeps every node.
    """
    if g.num_nodes == 0:
        raise GraphError("cannot split an empty graph")
    rng = SplitMix64.child(spec.seed, "split", spec.mode)

    if spec.mode == TRANSDUCTIVE:
        _, n_valid, n_test = _bucket_sizes(g.num_edges, spec.fractions)
        if n_test == 0 or n_valid == 0:
            raise GraphError(f"{g.num_edges} edges leave an empty valid or test set")
        perm = rng.permutation(g.num_edges)
        valid_idx = np.sort(perm[:n_valid])
        test_idx = np.sort(perm[n_valid:n_valid + n_test])
        mask = np.ones(g.num_edges, dtype=bool)
        mask[valid_idx] = False
        mask[test_idx] = False
        empty = np.empty(0, dtype=np.int64)
        return Split(
            spec=spec, graph=g, train_graph=induced_edge_subgraph(g, mask),
            train_nodes=np.arange(g.num_nodes), remap=np.arange(g.num_nodes),
            valid=EvalItems(empty, g.edges[valid_idx]),
            test=EvalItems(empty, g.edges[test_idx]),
        )

    if spec.inductive_node_type is None:
        candidates = np.arange(g.num_nodes)
    else:
        candidates = np.flatnonzero(g.node_type == spec.inductive_node_type)
    _, n_valid, n_test = _bucket_sizes(len(candidates), spec.fractions)
    if n_test == 0 or n_valid == 0:
        raise GraphError(f"{len(candidates)} candidate nodes leave an empty valid or test set")
    perm = candidates[rng.permutation(len(candidates))]
    valid_nodes = np.sort(perm[:n_valid])
    test_nodes = np.sort(perm[n_valid:n_valid + n_test])
    held = np.concatenate([valid_nodes, test_nodes])
    train_graph, remap = remove_nodes(g, held)
    train_nodes = np.flatnonzero(remap >= 0)

    is_train = remap >= 0
    dropped = 0
    items = []
    for nodes in (valid_nodes, test_nodes):
        rows = []
        for u in nodes:
            nbrs = g.neighbors(int(u))
            ok = is_train[nbrs]
            dropped += int((~ok).sum())
            rows.extend((int(u), int(v)) for v in nbrs[ok])
        items.append(EvalItems(nodes, np.array(rows, dtype=np.int64).reshape(-1, 2)))
    return Split(
        spec=spec, graph=g, train_graph=train_graph, train_nodes=train_nodes,
        remap=remap, valid=items[0], test=items[1], dropped_pairs=dropped // 2,
    )
