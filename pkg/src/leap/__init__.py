"""Inductive link prediction: a linker MLP wires newcomer nodes to anchor
nodes, then two message-passing towers embed the augmented graph."""

from .anchors import AnchorSet, select_anchors
from .evaluation import EvalReport, auc, average_precision, evaluate, summarize
from .graph import Graph, Split, SplitSpec, build_graph, make_split
from .io import DatasetBundle, load_dataset, write_dataset
from .model import ModelConfig, ModelParams, embed
from .rng import SplitMix64
from .training import TrainConfig, train

__all__ = [
    "AnchorSet", "DatasetBundle", "EvalReport", "Graph", "ModelConfig", "ModelParams",
    "Split", "SplitMix64", "SplitSpec", "TrainConfig", "auc", "average_precision",
    "build_graph", "embed", "evaluate", "load_dataset", "make_split", "select_anchors",
    "summarize", "train", "write_dataset",
]
