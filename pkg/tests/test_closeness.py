import math

import numpy as np
import pytest

from leap.anchors import AnchorSet
from leap.closeness import bfs_all, bfs_distances, closeness_labels
from leap.graph import build_graph

from helpers import floyd_warshall, path_graph, random_graph


def test_path_distances():
    assert bfs_distances(path_graph(3), 0, [1, 2]) == {1: 1, 2: 2}


def test_unreachable_is_inf():
    g = build_graph([], 2, np.zeros((2, 1)))
    assert bfs_distances(g, 0, [1]) == {1: math.inf}


def test_matches_floyd_warshall():
    rng = np.random.default_rng(0)
    g = random_graph(20, 0.12, rng)
    fw = floyd_warshall(20, g.edges.tolist())
    for s in range(20):
        got = bfs_distances(g, s)
        assert [got[t] for t in range(20)] == fw[s].tolist()
        ints = bfs_all(g, s)
        assert np.array_equal(np.where(ints < 0, math.inf, ints), fw[s])


def test_label_values():
    # 0-1-2-3 path plus isolated node 4
    g = build_graph([(0, 1), (1, 2), (2, 3)], 5, np.zeros((5, 1)))
    labels = closeness_labels(g, [0, 4], AnchorSet((1, 2, 3), "degree"))
    np.testing.assert_array_equal(labels.values, [[1.0, 0.5, 1 / 3], [0.0, 0.0, 0.0]])
    assert labels.row(4).tolist() == [0.0, 0.0, 0.0]


def test_labels_equal_inverse_floyd_warshall():
    rng = np.random.default_rng(1)
    g = random_graph(25, 0.1, rng)
    fw = floyd_warshall(25, g.edges.tolist())
    anchors = AnchorSet((3, 7, 11, 19), "random")
    nodes = [0, 1, 2, 5, 24]
    labels = closeness_labels(g, nodes, anchors)
    with np.errstate(divide="ignore"):
        expected = np.where(np.isinf(fw), 0.0, 1.0 / fw)[np.ix_(nodes, anchors.anchors)]
    np.testing.assert_array_equal(labels.values, expected)
    assert ((labels.values >= 0) & (labels.values <= 1)).all()


def test_overlap_rejected():
    with pytest.raises(ValueError):
        closeness_labels(path_graph(3), [1], AnchorSet((1,), "degree"))
