"""Hop distances and reciprocal-distance closeness targets for the linker."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .anchors import AnchorSet
from .graph import Graph


def bfs_distances(g: Graph, source: int, targets: Iterable[int] | None = None) -> dict[int, float]:
    """Unweighted hop distance from ``source``; ``math.inf`` when unreachable."""
    dist = bfs_all(g, source)
    wanted = range(g.num_nodes) if targets is None else targets
    return {int(t): (math.inf if dist[t] < 0 else float(dist[t])) for t in wanted}


def bfs_all(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source`` to every node, -1 for unreachable."""
    if not 0 <= source < g.num_nodes:
        raise IndexError(f"source {source} out of range")
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    indptr, indices = g.indptr, g.indices
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in indices[indptr[u]:indptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = du
                queue.append(v)
    return dist


@dataclass(frozen=True, eq=False)
class ClosenessLabels:
    nodes: np.ndarray
    values: np.ndarray
    anchor_set: AnchorSet

    def row(self, node: int) -> np.ndarray:
        return self.values[int(np.flatnonzero(self.nodes == node)[0])]


def closeness_labels(g: Graph, inductive: Iterable[int], anchors: AnchorSet) -> ClosenessLabels:
    """``w[i, j] = 1 / dist(i, a_j)``, 0 when ``a_j`` is unreachable from ``i``.

    Must run on the graph that still contains the inductive nodes. One BFS
    per anchor covers every inductive node, since distances are symmetric.
    """
    nodes = np.asarray(list(inductive), dtype=np.int64)
    anchor_ids = anchors.as_array()
    overlap = np.intersect1d(nodes, anchor_ids)
    if len(overlap):
        raise ValueError(f"inductive nodes overlap the anchor set: {overlap.tolist()}")
    values = np.zeros((len(nodes), len(anchor_ids)))
    for j, a in enumerate(anchor_ids):
        d = bfs_all(g, int(a))[nodes]
        reach = d > 0
        values[reach, j] = 1.0 / d[reach]
    return ClosenessLabels(nodes, values, anchors)
