"""Ranking metrics and the held-out link prediction protocols."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .anchors import AnchorSet
from .autodiff import Tape
from .graph import EvalItems, Split
from .model import ModelParams, decode, embed
from .rng import SplitMix64


def _check_scores(pos, neg):
    pos = np.asarray(pos, dtype=np.float64).ravel()
    neg = np.asarray(neg, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need at least one positive and one negative score")
    return pos, neg


def auc(scores_pos, scores_neg) -> float:
    """Probability a positive outscores a negative, ties counting one half."""
    pos, neg = _check_scores(scores_pos, scores_neg)
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def average_precision(scores_pos, scores_neg) -> float:
    """Step-wise area under the precision-recall curve.

    Scores are ranked descending with negatives placed ahead of tied
    positives, so ties never help.
    """
    pos, neg = _check_scores(scores_pos, scores_neg)
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos), dtype=np.int64), np.zeros(len(neg), dtype=np.int64)])
    order = np.lexsort((labels, -scores))
    hits = labels[order]
    tp = np.cumsum(hits)
    rank = np.arange(1, len(hits) + 1)
    precision = tp[hits == 1] / rank[hits == 1]
    return math.fsum(precision.tolist()) / len(pos)


@dataclass
class EvalReport:
    auc: float
    ap: float
    n_pos: int
    n_neg: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def _sample_eval_negatives(split: Split, items: EvalItems, rng: SplitMix64) -> np.ndarray:
    """One non-edge per positive, in full-graph ids."""
    g = split.graph
    n = g.num_nodes
    keys = g.edge_keys()
    if split.inductive:
        sources = items.edges[:, 0]
        pool = split.train_nodes
        out = pool[rng.integers(len(pool), len(sources))]
        while True:
            bad = np.isin(sources * n + out, keys) | (out == sources)
            count = int(bad.sum())
            if count == 0:
                return np.stack([sources, out], axis=1)
            out[bad] = pool[rng.integers(len(pool), count)]
    pairs = rng.integers(n, 2 * len(items.edges)).reshape(-1, 2)
    while True:
        bad = (pairs[:, 0] == pairs[:, 1]) | np.isin(pairs[:, 0] * n + pairs[:, 1], keys)
        count = int(bad.sum())
        if count == 0:
            return pairs
        pairs[bad] = rng.integers(n, 2 * count).reshape(-1, 2)


def score_pairs(
    params: ModelParams, split: Split, items: EvalItems, anchors: AnchorSet,
    pairs: np.ndarray, augment: str = "learned",
) -> np.ndarray:
    """Decode full-graph id pairs after embedding the train graph plus newcomers."""
    base = split.train_graph
    tape = Tape(record=False)
    if split.inductive:
        newcomers = items.nodes
        g = split.graph
        fwd = embed(tape, params, base, anchors.as_array(), g.features[newcomers], g.node_type[newcomers], augment)
        to_aug = np.full(g.num_nodes, -1, dtype=np.int64)
        to_aug[split.train_nodes] = split.remap[split.train_nodes]
        to_aug[newcomers] = base.num_nodes + np.arange(len(newcomers))
        mapped = to_aug[pairs]
        if (mapped < 0).any():
            raise ValueError("evaluation pair touches a node outside train graph and newcomers")
    else:
        fwd = embed(tape, params, base, anchors.as_array(), augment=augment)
        mapped = pairs
    return decode(tape, fwd.z, mapped).values[:, 0]


def evaluate(
    params: ModelParams, split: Split, items: EvalItems, anchors: AnchorSet,
    seed: int = 0, augment: str = "learned",
) -> EvalReport:
    """AUC/AP of held-out edges against an equal number of sampled non-edges.

    Inductive: newcomers join the train graph only through the linker, and
    each negative pairs the newcomer with a random train node it is not
    linked to. Transductive: negatives are uniform node pairs that are not
    edges of the full graph.
    """
    if len(items.edges) == 0:
        raise ValueError("no positive pairs to evaluate")
    if split.inductive:
        _assert_no_leak(split, items)
    rng = SplitMix64.child(seed, "eval-negatives")
    negatives = _sample_eval_negatives(split, items, rng)
    scores = score_pairs(params, split, items, anchors, np.concatenate([items.edges, negatives]), augment)
    pos, neg = scores[:len(items.edges)], scores[len(items.edges):]
    return EvalReport(auc(pos, neg), average_precision(pos, neg), len(pos), len(neg), seed)


def _assert_no_leak(split: Split, items: EvalItems) -> None:
    if (split.remap[items.nodes] >= 0).any():
        raise AssertionError("evaluation newcomers are present in the train graph")


def summarize(reports: list[EvalReport], dataset: str, mode: str) -> dict:
    """Metrics JSON: per-run values plus population mean and std."""
    aucs = np.array([r.auc for r in reports])
    aps = np.array([r.ap for r in reports])
    return {
        "dataset": dataset,
        "mode": mode,
        "runs": [{"seed": r.seed, "auc": r.auc, "ap": r.ap} for r in reports],
        "mean_auc": float(aucs.mean()),
        "std_auc": float(aucs.std()),
        "mean_ap": float(aps.mean()),
        "std_ap": float(aps.std()),
    }
