"""Anchor selection: random, degree, PageRank, Louvain communities, node type."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .rng import SplitMix64


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AnchorSet:
    anchors: tuple[int, ...]
    strategy: str
    seed: int | None = None

    def __post_init__(self):
        if len(set(self.anchors)) != len(self.anchors):
            raise ValueError("anchor ids must be distinct")

    def __len__(self) -> int:
        return len(self.anchors)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.anchors, dtype=np.int64)


@dataclass(frozen=True)
class CommunityPartition:
    community: np.ndarray
    modularity: float
    seed: int | None = None
    history: tuple[float, ...] = field(default=())

    @property
    def num_communities(self) -> int:
        return int(self.community.max()) + 1 if len(self.community) else 0

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.community == c)


def _check_k(g: Graph, k: int, pool: int | None = None) -> None:
    pool = g.num_nodes if pool is None else pool
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > pool:
        raise ValueError(f"k={k} exceeds the {pool} available nodes")


def _rank(keys: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Order ``ids`` by ``keys`` descending, ties by ascending id."""
    return ids[np.lexsort((ids, -keys))]


def select_random(g: Graph, k: int, seed: int, exclude=()) -> AnchorSet:
    pool = np.setdiff1d(np.arange(g.num_nodes), np.asarray(list(exclude), dtype=np.int64))
    _check_k(g, k, len(pool))
    rng = SplitMix64.child(seed, "anchors", "random")
    chosen = rng.sample(pool.tolist(), k)
    return AnchorSet(tuple(int(a) for a in chosen), "random", seed)


def select_by_degree(g: Graph, k: int) -> AnchorSet:
    _check_k(g, k)
    ranked = _rank(g.degrees().astype(np.float64), np.arange(g.num_nodes))
    return AnchorSet(tuple(int(a) for a in ranked[:k]), "degree")


def pagerank(
    g: Graph, damping: float = 0.85, tol: float = 1e-10, max_iter: int = 200
) -> np.ndarray:
    """Power iteration for PageRank with uniform teleport.

    Isolated nodes spread their mass uniformly. Stops when the L1 change
    between iterates drops below ``tol``; otherwise warns and returns the
    last iterate.
    """
    n = g.num_nodes
    if n == 0:
        raise ValueError("pagerank of an empty graph")
    deg = g.degrees().astype(np.float64)
    dangling = deg == 0
    inv = np.divide(1.0, deg, out=np.zeros(n), where=~dangling)
    adj = sp.csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(n, n))
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        spread = adj @ (r * inv)
        nxt = damping * (spread + r[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        delta = np.abs(nxt - r).sum()
        r = nxt
        if delta < tol:
            return r
    warnings.warn(f"pagerank did not converge in {max_iter} iterations", ConvergenceWarning)
    return r


def select_by_pagerank(g: Graph, k: int, damping: float = 0.85) -> AnchorSet:
    _check_k(g, k)
    # Rounding keeps symmetric nodes tied despite summation-order noise.
    scores = np.round(pagerank(g, damping), 12)
    ranked = _rank(scores, np.arange(g.num_nodes))
    return AnchorSet(tuple(int(a) for a in ranked[:k]), "pagerank")


# --- Louvain ----------------------------------------------------------------

def modularity(g: Graph, community: np.ndarray) -> float:
    """Q = sum_c [ in_c / 2m - (tot_c / 2m)^2 ] on the unweighted graph."""
    if g.num_edges == 0:
        return 0.0
    two_m = 2.0 * g.num_edges
    community = np.asarray(community)
    cu, cv = community[g.edges[:, 0]], community[g.edges[:, 1]]
    n_comm = int(community.max()) + 1
    inside = np.bincount(cu[cu == cv], minlength=n_comm) * 2.0
    total = np.bincount(community, weights=g.degrees().astype(np.float64), minlength=n_comm)
    return float(np.sum(inside / two_m - (total / two_m) ** 2))


def _relabel(labels: np.ndarray) -> np.ndarray:
    """Contiguous ids in order of first appearance."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse]


def _move_nodes(adj: sp.csr_matrix, rng: SplitMix64) -> tuple[np.ndarray, bool]:
    """Local-moving phase on a weighted graph whose diagonal holds self-loops."""
    n = adj.shape[0]
    k = np.asarray(adj.sum(axis=1)).ravel()
    two_m = k.sum()
    labels = np.arange(n)
    tot = k.copy()
    indptr, indices, data = adj.indptr, adj.indices, adj.data
    moved_any = False
    while True:
        moved = False
        for i in rng.permutation(n):
            own = labels[i]
            links: dict[int, float] = {}
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:
                    links[labels[j]] = links.get(labels[j], 0.0) + data[p]
            tot[own] -= k[i]
            best, best_gain = own, links.get(own, 0.0) - tot[own] * k[i] / two_m
            for c in sorted(links):
                gain = links[c] - tot[c] * k[i] / two_m
                if gain > best_gain + 1e-12:
                    best, best_gain = c, gain
            tot[best] += k[i]
            if best != own:
                labels[i] = best
                moved = True
        if not moved:
            break
        moved_any = True
    return labels, moved_any


def louvain(g: Graph, seed: int = 0, min_gain: float = 1e-7) -> CommunityPartition:
    """Two-phase Louvain modularity maximization (resolution 1).

    Each pass runs local moves in a seeded random node order until no move
    helps, then contracts communities into a weighted supergraph. Stops when
    a pass changes nothing or raises modularity by less than ``min_gain``.
    ``history`` holds the modularity after every pass.
    """
    n = g.num_nodes
    if g.num_edges == 0:
        return CommunityPartition(np.arange(n), 0.0, seed, (0.0,))
    rng = SplitMix64.child(seed, "louvain")
    adj = sp.csr_matrix(
        (np.ones(len(g.indices)), g.indices, g.indptr), shape=(n, n), dtype=np.float64
    )
    membership = np.arange(n)
    q = modularity(g, membership)
    history = [q]
    while True:
        labels, moved = _move_nodes(adj, rng)
        if not moved:
            break
        labels = _relabel(labels)
        candidate = labels[membership]
        new_q = modularity(g, candidate)
        if new_q < q:
            break
        membership = candidate
        gain = new_q - q
        q = new_q
        history.append(q)
        if gain < min_gain:
            break
        n_comm = int(labels.max()) + 1
        agg = sp.csr_matrix(
            (np.ones(len(labels)), (labels, np.arange(len(labels)))),
            shape=(n_comm, len(labels)),
        )
        adj = (agg @ adj @ agg.T).tocsr()
        adj.sort_indices()
    membership = _relabel(membership)
    return CommunityPartition(membership, modularity(g, membership), seed, tuple(history))


def _largest_remainder(weights: np.ndarray, k: int, caps: np.ndarray | None = None) -> np.ndarray:
    """Split ``k`` across buckets proportionally to ``weights``.

    Floors first, then leftover units go to the largest fractional parts
    (ties to the lower bucket index). Units over a bucket's cap are
    redistributed the same way among buckets with room.
    """
    weights = np.asarray(weights, dtype=np.float64)
    caps = np.full(len(weights), np.iinfo(np.int64).max) if caps is None else np.asarray(caps)
    quota = np.zeros(len(weights), dtype=np.int64)
    remaining = k
    open_ = caps > 0
    while remaining > 0 and open_.any():
        w = np.where(open_, weights, 0.0)
        if w.sum() == 0:
            w = open_.astype(np.float64)
        exact = remaining * w / w.sum()
        base = np.floor(exact).astype(np.int64)
        left = remaining - int(base.sum())
        order = np.lexsort((np.arange(len(w)), -(exact - base)))
        for b in order[:left]:
            base[b] += 1
        add = np.minimum(base, caps - quota)
        quota += add
        remaining -= int(add.sum())
        open_ = quota < caps
    return quota


def community_quotas(sizes: np.ndarray, k: int) -> np.ndarray:
    return _largest_remainder(np.asarray(sizes), k, np.asarray(sizes))


def select_community(
    g: Graph, k: int, inner: str = "degree", seed: int = 0,
    partition: CommunityPartition | None = None,
) -> AnchorSet:
    """Anchors drawn per Louvain community, quotas proportional to size."""
    _check_k(g, k)
    if inner not in ("degree", "random"):
        raise ValueError(f"inner strategy must be degree or random, got {inner!r}")
    part = partition if partition is not None else louvain(g, seed)
    sizes = np.bincount(part.community, minlength=part.num_communities)
    quotas = community_quotas(sizes, k)
    deg = g.degrees().astype(np.float64)
    rng = SplitMix64.child(seed, "anchors", "community")
    chosen: list[int] = []
    for c, quota in enumerate(quotas):
        if quota == 0:
            continue
        members = part.members(c)
        if inner == "degree":
            picked = _rank(deg[members], members)[:quota]
        else:
            picked = rng.sample(members.tolist(), int(quota))
        chosen.extend(int(a) for a in picked)
    return AnchorSet(tuple(chosen), f"community-{inner}", seed)


def select_by_type(g: Graph, k: int, seed: int) -> AnchorSet:
    """Equal per-node-type quotas, uniform draws inside each type."""
    _check_k(g, k)
    sizes = np.bincount(g.node_type, minlength=g.num_node_types)
    quotas = _largest_remainder((sizes > 0).astype(np.float64), k, sizes)
    rng = SplitMix64.child(seed, "anchors", "typed")
    chosen: list[int] = []
    for t, quota in enumerate(quotas):
        if quota:
            members = np.flatnonzero(g.node_type == t)
            chosen.extend(int(a) for a in rng.sample(members.tolist(), int(quota)))
    return AnchorSet(tuple(chosen), "typed", seed)


STRATEGIES = ("random", "degree", "pagerank", "community", "typed", "auto")


def select_anchors(g: Graph, strategy: str, k: int, seed: int = 0, inner: str = "degree") -> AnchorSet:
    """Dispatch by strategy name; ``auto`` is typed on heterogeneous graphs, degree otherwise."""
    if strategy == "auto":
        strategy = "typed" if g.is_heterogeneous else "degree"
    if strategy == "random":
        return select_random(g, k, seed)
    if strategy == "degree":
        return select_by_degree(g, k)
    if strategy == "pagerank":
        return select_by_pagerank(g, k)
    if strategy == "community":
        return select_community(g, k, inner, seed)
    if strategy == "typed":
        return select_by_type(g, k, seed)
    raise ValueError(f"unknown anchor strategy {strategy!r}; expected one of {STRATEGIES}")

