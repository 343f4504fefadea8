"""Seeded stochastic block model benchmark with noisy block-indicator features."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_graph
from .rng import SplitMix64


def sbm_graph(
    n_nodes: int = 400,
    n_blocks: int = 2,
    p_in: float = 0.05,
    p_out: float = 0.005,
    noise: float = 0.5,
    seed: int = 0,
) -> tuple[Graph, np.ndarray]:
    """Contiguous equal blocks; features are one-hot block + N(0, noise^2).

    Pairs ``(u, v), u < v`` are visited row-major, one uniform draw each.
    Returns the graph and the block of every node.
    """
    block = (np.arange(n_nodes) * n_blocks) // n_nodes
    rng = SplitMix64.child(seed, "sbm", "edges")
    iu, iv = np.triu_indices(n_nodes, k=1)
    draws = rng.random(len(iu))
    prob = np.where(block[iu] == block[iv], p_in, p_out)
    hit = draws < prob
    edges = np.stack([iu[hit], iv[hit]], axis=1)
    feat_rng = SplitMix64.child(seed, "sbm", "features")
    features = np.eye(n_blocks)[block] + noise * feat_rng.normal(n_nodes * n_blocks).reshape(n_nodes, n_blocks)
    # float32-exact, so a dataset written to disk reloads bit-identically
    features = features.astype(np.float32).astype(np.float64)
    return build_graph(edges.tolist(), n_nodes, features), block
