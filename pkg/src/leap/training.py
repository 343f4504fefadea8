"""Joint training of the linker and the encoder.

Each epoch a set of training nodes is held out as simulated newcomers: their
closeness to the anchors is measured on the full training graph, then they
are cut loose and must be re-attached through the linker. The loss is the
negative-sampling link likelihood over all training edges (including the
held-out nodes' edges) plus ``gamma`` times the closeness regression.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .anchors import AnchorSet, select_anchors
from .autodiff import Adam, NonFiniteError, Tape, Tensor
from .closeness import closeness_labels
from .graph import Graph, Split, remove_nodes
from .model import AUGMENT_MODES, ModelConfig, ModelParams, decode, embed
from .rng import SplitMix64

log = logging.getLogger(__name__)


class DenseNeighborhoodWarning(UserWarning):
    """Too few non-neighbors to draw negatives; fell back to any other node."""


class DivergenceError(RuntimeError):
    pass


def mlp_loss(tape: Tape, predicted, target) -> Tensor:
    """Mean over newcomers of the squared distance between score vectors."""
    return tape.mse(predicted, target)


def gnn_loss(tape: Tape, z: Tensor, positives, negatives) -> Tensor:
    """Negated negative-sampling log-likelihood, averaged over positives.

    For a positive ``(i, j)`` with negatives ``p``: ``-[log s(z_i.z_j) +
    sum_p log s(-z_i.z_p)]``.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    negatives = np.asarray(negatives, dtype=np.int64)
    if len(positives) == 0:
        raise ValueError("gnn_loss needs at least one positive pair")
    negatives = negatives.reshape(len(positives), -1)
    q = negatives.shape[1]
    pos_term = tape.sum(tape.logsigmoid(decode(tape, z, positives)))
    neg_pairs = np.stack([np.repeat(positives[:, 0], q), negatives.ravel()], axis=1)
    neg_term = tape.sum(tape.logsigmoid(tape.neg(decode(tape, z, neg_pairs))))
    return tape.scale(tape.add(pos_term, neg_term), -1.0 / len(positives))


def sample_negatives_batch(g: Graph, sources, q: int, rng: SplitMix64) -> np.ndarray:
    """``q`` negatives per source, uniform over nodes that are neither the
    source nor its neighbors; distinct within one source's draw.

    Sources whose neighborhood leaves fewer than ``q`` candidates fall back to
    uniform over all other nodes and trigger a :class:`DenseNeighborhoodWarning`.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    sources = np.asarray(sources, dtype=np.int64)
    n = g.num_nodes
    if n < 2:
        raise ValueError("negative sampling needs at least two nodes")
    keys = g.edge_keys()
    room = n - 1 - g.degrees()[sources]
    fallback = room < q
    if fallback.any():
        warnings.warn(
            f"{int(fallback.sum())} source(s) lack {q} non-neighbors; sampling from all other nodes",
            DenseNeighborhoodWarning,
        )
    distinct = q <= n - 1
    out = rng.integers(n, len(sources) * q).reshape(len(sources), q)
    src = sources[:, None]
    while True:
        bad = out == src
        adjacent = np.isin(src * n + out, keys)
        bad |= adjacent & ~fallback[:, None]
        if distinct:
            for col in range(1, q):
                bad[:, col] |= (out[:, :col] == out[:, col:col + 1]).any(axis=1)
        count = int(bad.sum())
        if count == 0:
            return out
        out[bad] = rng.integers(n, count)


def sample_negatives(g: Graph, i: int, q: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, SplitMix64) else SplitMix64.child(seed, "negatives")
    return sample_negatives_batch(g, [i], q, rng)[0]


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.001
    gamma: float = 0.5
    q: int = 1
    holdout: int | None = None
    anchor_strategy: str = "auto"
    k: int = 100
    seed: int = 0
    patience: int = 20
    hidden: int = 128
    layers: int = 2
    augment: str = "learned"
    resample_holdout: bool = True
    normalize_edges: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.holdout is not None and self.holdout < 1:
            raise ValueError("holdout size must be >= 1")
        if self.epochs < 0 or self.patience < 1:
            raise ValueError("epochs must be >= 0 and patience >= 1")
        if self.augment not in AUGMENT_MODES:
            raise ValueError(f"augment must be one of {AUGMENT_MODES}")

    def model_config(self, g: Graph, k: int) -> ModelConfig:
        return ModelConfig(
            k=k, in_dim=g.feature_dim, hidden=self.hidden, layers=self.layers,
            num_node_types=g.num_node_types, num_edge_types=g.num_edge_types,
            normalize_edges=self.normalize_edges,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: ModelParams
    anchors: AnchorSet
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_auc: float = float("nan")


@dataclass
class EpochBatch:
    """One epoch's holdout graph, labels and supervision, in augmented ids."""

    base: Graph
    anchors_base: np.ndarray
    new_features: np.ndarray
    new_types: np.ndarray
    targets: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray


def holdout_size(cfg: TrainConfig, g: Graph, n_anchors: int) -> int:
    avail = g.num_nodes - n_anchors
    n = cfg.holdout if cfg.holdout is not None else max(1, math.floor(0.1 * g.num_nodes + 0.5))
    if avail < 1:
        raise ValueError("no non-anchor nodes left to hold out")
    return min(n, avail)


def make_epoch_batch(
    g: Graph, anchors: AnchorSet, n_hold: int, q: int,
    holdout_rng: SplitMix64, negative_rng: SplitMix64,
) -> EpochBatch:
    anchor_ids = anchors.as_array()
    pool = np.setdiff1d(np.arange(g.num_nodes), anchor_ids)
    held = np.sort(np.asarray(holdout_rng.sample(pool.tolist(), n_hold), dtype=np.int64))
    labels = closeness_labels(g, held, anchors)
    base, remap = remove_nodes(g, held)
    aug_id = remap.copy()
    aug_id[held] = base.num_nodes + np.arange(len(held))

    is_held = remap < 0
    e = g.edges
    keep = ~(is_held[e[:, 0]] & is_held[e[:, 1]])
    e = e[keep]
    # Orient every pair from both ends; newcomer-first rows mirror evaluation.
    pos = np.concatenate([e, e[:, ::-1]])
    neg = sample_negatives_batch(g, pos[:, 0], q, negative_rng)
    return EpochBatch(
        base=base,
        anchors_base=remap[anchor_ids],
        new_features=g.features[held],
        new_types=g.node_type[held],
        targets=labels.values,
        positives=aug_id[pos],
        negatives=aug_id[neg],
    )


def epoch_losses(params: ModelParams, batch: EpochBatch, gamma: float, augment: str, tape: Tape):
    fwd = embed(tape, params, batch.base, batch.anchors_base, batch.new_features, batch.new_types, augment)
    loss_gnn = gnn_loss(tape, fwd.z, batch.positives, batch.negatives)
    loss_mlp = mlp_loss(tape, fwd.scores, batch.targets)
    if gamma > 0:
        total = tape.add(loss_gnn, tape.scale(loss_mlp, gamma))
    else:
        total = loss_gnn
    return total, loss_gnn, loss_mlp


def train(
    split: Split,
    cfg: TrainConfig,
    anchors: AnchorSet | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Full-batch Adam training with early stopping on validation AUC.

    Returns the parameters from the best validation epoch. With
    ``epochs == 0`` the freshly initialized parameters come back untouched.
    """
    from .evaluation import evaluate

    g = split.train_graph
    if anchors is None:
        anchors = select_anchors(g, cfg.anchor_strategy, min(cfg.k, g.num_nodes - 1), cfg.seed)
    params = ModelParams(cfg.model_config(g, len(anchors)), seed=cfg.seed)
    opt = Adam(params.parameters(), lr=cfg.lr)
    n_hold = holdout_size(cfg, g, len(anchors))
    result = TrainResult(params, anchors)
    best_state = params.state()
    since_best = 0
    val_seed = SplitMix64.child(cfg.seed, "valid-negatives").seed

    for epoch in range(cfg.epochs):
        holdout_rng = SplitMix64.child(cfg.seed, "holdout", epoch if cfg.resample_holdout else 0)
        negative_rng = SplitMix64.child(cfg.seed, "negatives", epoch)
        batch = make_epoch_batch(g, anchors, n_hold, cfg.q, holdout_rng, negative_rng)
        tape = Tape()
        params.zero_grad()
        total, loss_gnn, loss_mlp = epoch_losses(params, batch, cfg.gamma, cfg.augment, tape)
        record = {
            "epoch": epoch,
            "loss_total": total.item(),
            "loss_gnn": loss_gnn.item(),
            "loss_mlp": loss_mlp.item(),
        }
        if not all(math.isfinite(v) for v in (record["loss_total"], record["loss_gnn"])):
            raise DivergenceError(f"non-finite loss at epoch {epoch}: {record}")
        try:
            tape.backward(total)
        except NonFiniteError as exc:
            raise DivergenceError(f"non-finite gradient at epoch {epoch}") from exc
        opt.step()

        report = evaluate(params, split, split.valid, anchors, seed=val_seed, augment=cfg.augment)
        record["val_auc"], record["val_ap"] = report.auc, report.ap
        result.history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        log.debug("epoch %d %s", epoch, record)

        if not report.auc <= result.best_val_auc:
            result.best_val_auc = report.auc
            result.best_epoch = epoch
            best_state = params.state()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    params.load_state(best_state)
    return result

