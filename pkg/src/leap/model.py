"""Linker MLP, dual message-passing encoder, and dot-product decoder.

Newcomer nodes get no original edges. The linker maps each newcomer's
features to a k-vector of closeness scores; those scores become weighted,
symmetric newcomer<->anchor edges. One tower passes messages over the
original edges (one weight matrix per edge type), a second tower over the
augmented edges only, and the final embedding is the sum of both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anchors import AnchorSet
from .autodiff import SparseAdj, Tape, Tensor, coo_order
from .graph import Graph
from .rng import SplitMix64

AUGMENT_MODES = ("learned", "unweighted", "none")


@dataclass(frozen=True)
class ModelConfig:
    k: int
    in_dim: int
    hidden: int = 128
    layers: int = 2
    num_node_types: int = 1
    num_edge_types: int = 1
    normalize_edges: bool = False
    aggregation: str = "sum"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("need at least one message-passing layer")
        if self.aggregation != "sum":
            raise ValueError(f"unsupported aggregation {self.aggregation!r}; only 'sum'")
        if self.k < 1 or self.in_dim < 1 or self.hidden < 1:
            raise ValueError("k, in_dim and hidden must be positive")


class ModelParams:
    """All learnable matrices, addressable by name.

    Names: ``linker.W.{t}`` (in_dim x k) and ``linker.b.{t}`` (1 x k) per node
    type; ``gnn.E.{l}.self`` and ``gnn.E.{l}.rel.{r}`` for the original-edge
    tower; ``gnn.A.{l}.self`` and ``gnn.A.{l}.aug`` for the augmented tower.
    Weights act on row vectors, so a layer computes ``h @ W``.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.tensors: dict[str, Tensor] = {}
        for shape, name in self._layout():
            fan_in, fan_out = shape
            if name.startswith("linker.b"):
                values = np.zeros(shape)
            else:
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                rng = SplitMix64.child(seed, "init", name)
                values = rng.uniform(-limit, limit, fan_in * fan_out).reshape(shape)
            self.tensors[name] = Tensor(values, requires_grad=True, name=name)

    def _layout(self):
        c = self.config
        for t in range(c.num_node_types):
            yield (c.in_dim, c.k), f"linker.W.{t}"
            yield (1, c.k), f"linker.b.{t}"
        for l in range(c.layers):
            d_in = c.in_dim if l == 0 else c.hidden
            yield (d_in, c.hidden), f"gnn.E.{l}.self"
            for r in range(c.num_edge_types):
                yield (d_in, c.hidden), f"gnn.E.{l}.rel.{r}"
            yield (d_in, c.hidden), f"gnn.A.{l}.self"
            yield (d_in, c.hidden), f"gnn.A.{l}.aug"

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def linker_parameters(self) -> list[Tensor]:
        return [t for n, t in self.tensors.items() if n.startswith("linker.")]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {n: t.values.copy() for n, t in self.tensors.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.tensors) - set(state)
        if missing:
            raise KeyError(f"state lacks parameters: {sorted(missing)}")
        for n, t in self.tensors.items():
            arr = np.asarray(state[n], dtype=np.float64)
            if arr.shape != t.shape:
                raise ValueError(f"{n}: expected shape {t.shape}, got {arr.shape}")
            t.values = arr.copy()


def link(tape: Tape, params: ModelParams, x_new, node_types) -> Tensor:
    """Closeness scores ``sigmoid(x W_t + b_t)`` under each node's own type."""
    x = x_new if isinstance(x_new, Tensor) else Tensor(x_new)
    types = np.asarray(node_types, dtype=np.int64)
    n_types = params.config.num_node_types
    if len(types) and (types.min() < 0 or types.max() >= n_types):
        raise ValueError(f"node type outside [0, {n_types})")
    if x.shape[1] != params.config.in_dim:
        raise ValueError(f"feature dim {x.shape[1]} != linker input dim {params.config.in_dim}")
    present = np.unique(types)
    if len(present) <= 1:
        t = int(present[0]) if len(present) else 0
        return _link_one(tape, params, x, t)
    out = None
    for t in present:
        mask = np.repeat((types == t).astype(np.float64)[:, None], params.config.k, axis=1)
        part = tape.mul(_link_one(tape, params, x, int(t)), mask)
        out = part if out is None else tape.add(out, part)
    return out


def _link_one(tape: Tape, params: ModelParams, x: Tensor, t: int) -> Tensor:
    pre = tape.add_bias(tape.matmul(x, params[f"linker.W.{t}"]), params[f"linker.b.{t}"])
    return tape.sigmoid(pre)


def build_augmented(
    tape: Tape, n_base: int, anchors, weights: Tensor | None, mode: str = "learned",
    normalize: bool = False,
) -> SparseAdj:
    """Symmetric newcomer<->anchor adjacency over ``n_base + n_new`` nodes.

    Newcomer ``i`` sits at row ``n_base + i``. ``learned`` uses the linker
    scores as differentiable edge weights; ``unweighted`` keeps only pairs
    scored >= 0.5, with weight 1 and no gradient; ``none`` adds no edges.
    ``normalize`` multiplies every weight by ``1 / sqrt(k * n_new)``, the
    symmetric degree normalization of the complete newcomer-anchor bipartite
    graph.
    """
    if mode not in AUGMENT_MODES:
        raise ValueError(f"unknown augment mode {mode!r}")
    anchors = np.asarray(anchors.anchors if isinstance(anchors, AnchorSet) else anchors, dtype=np.int64)
    if len(anchors) and (anchors.min() < 0 or anchors.max() >= n_base):
        raise ValueError("anchor outside the base graph")
    n_new = 0 if weights is None else weights.shape[0]
    total = n_base + n_new
    if mode == "none" or n_new == 0:
        return SparseAdj.empty(total)
    if weights.shape[1] != len(anchors):
        raise ValueError(f"{weights.shape[1]} scores per newcomer but {len(anchors)} anchors")
    k = len(anchors)
    new_idx = np.repeat(np.arange(n_new), k)
    anchor_col = np.tile(np.arange(k), n_new)
    if mode == "unweighted":
        keep = weights.values[new_idx, anchor_col] >= 0.5
        new_idx, anchor_col = new_idx[keep], anchor_col[keep]
    rows = np.concatenate([n_base + new_idx, anchors[anchor_col]])
    cols = np.concatenate([anchors[anchor_col], n_base + new_idx])
    src_i = np.concatenate([new_idx, new_idx])
    src_j = np.concatenate([anchor_col, anchor_col])
    order = coo_order(rows, cols)
    norm = 1.0 / math.sqrt(k * n_new) if normalize else 1.0
    if mode == "unweighted":
        adj, _ = SparseAdj.from_coo(rows, cols, np.full(len(rows), norm), (total, total))
        return adj
    alpha = tape.gather(weights, src_i[order], src_j[order])
    if normalize:
        alpha = tape.scale(alpha, norm)
    adj, _ = SparseAdj.from_coo(rows, cols, alpha, (total, total))
    return adj


def original_layers(g: Graph, total: int, normalize: bool = False) -> list[SparseAdj]:
    """One adjacency per edge type, padded to ``total`` nodes.

    ``alpha = 1`` by default; ``normalize`` uses ``1 / sqrt(deg_i deg_j)``
    with degrees over all edge types.
    """
    deg = np.zeros(total)
    deg[:g.num_nodes] = g.degrees()
    layers = []
    for r in range(g.num_edge_types):
        e = g.edges_of_type(r)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        if normalize:
            w = 1.0 / np.sqrt(deg[rows] * deg[cols])
        else:
            w = np.ones(len(rows))
        adj, _ = SparseAdj.from_coo(rows, cols, w, (total, total))
        layers.append(adj)
    return layers


def encode(tape: Tape, params: ModelParams, x_all, original: list[SparseAdj], augmented: SparseAdj) -> Tensor:
    """``Z = Z_E + Z_A``; each tower stacks ``relu(h W_self + sum_r S_r h W_r)``."""
    x = x_all if isinstance(x_all, Tensor) else Tensor(x_all)
    c = params.config
    if len(original) != c.num_edge_types:
        raise ValueError(f"{len(original)} edge-type layers for {c.num_edge_types} edge types")
    h_e = x
    for l in range(c.layers):
        acc = tape.matmul(h_e, params[f"gnn.E.{l}.self"])
        for r, s in enumerate(original):
            if s.nnz:
                acc = tape.add(acc, tape.spmm(s, tape.matmul(h_e, params[f"gnn.E.{l}.rel.{r}"])))
        h_e = tape.relu(acc)
    h_a = x
    for l in range(c.layers):
        acc = tape.matmul(h_a, params[f"gnn.A.{l}.self"])
        if augmented.nnz:
            acc = tape.add(acc, tape.spmm(augmented, tape.matmul(h_a, params[f"gnn.A.{l}.aug"])))
        h_a = tape.relu(acc)
    return tape.add(h_e, h_a)


def decode(tape: Tape, z: Tensor, pairs) -> Tensor:
    """Dot-product score ``z_i . z_j`` for every ``(i, j)`` row of ``pairs``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return tape.rowwise_dot(tape.gather_rows(z, pairs[:, 0]), tape.gather_rows(z, pairs[:, 1]))


@dataclass
class Forward:
    z: Tensor
    scores: Tensor | None
    n_base: int
    augmented: SparseAdj


def embed(
    tape: Tape, params: ModelParams, base: Graph, anchors, new_features=None,
    new_types=None, augment: str = "learned",
) -> Forward:
    """Run link -> build_augmented -> encode for ``base`` plus newcomers."""
    n_base = base.num_nodes
    if new_features is None or len(new_features) == 0:
        x_all = base.features
        scores = None
    else:
        new_features = np.asarray(new_features, dtype=np.float64)
        types = np.zeros(len(new_features), dtype=np.int64) if new_types is None else new_types
        scores = link(tape, params, new_features, types)
        x_all = np.vstack([base.features, new_features])
    total = len(x_all)
    normalize = params.config.normalize_edges
    aug = build_augmented(tape, n_base, anchors, scores, augment, normalize)
    layers = original_layers(base, total, normalize)
    z = encode(tape, params, x_all, layers, aug)
    return Forward(z, scores, n_base, aug)
