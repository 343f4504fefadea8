import numpy as np
import pytest

from leap.autodiff import SparseAdj, Tape, Tensor
from leap.graph import build_graph
from leap.model import (
    ModelConfig, ModelParams, build_augmented, decode, embed, encode, link, original_layers,
)
from leap.training import gnn_loss

from helpers import max_grad_error, path_graph, random_graph


def make_params(k=3, in_dim=2, hidden=2, layers=1, **kw):
    return ModelParams(ModelConfig(k=k, in_dim=in_dim, hidden=hidden, layers=layers, **kw), seed=0)


def zero_all(params):
    for t in params.parameters():
        t.values[:] = 0.0


# --- linker ---------------------------------------------------------------------

def test_link_zero_weights_half():
    p = make_params()
    zero_all(p)
    out = link(Tape(), p, np.ones((4, 2)), [0] * 4)
    assert out.shape == (4, 3) and (out.values == 0.5).all()


def test_link_bias_saturates():
    p = make_params()
    zero_all(p)
    p["linker.b.0"].values[0, 1] = 30.0
    out = link(Tape(), p, np.ones((2, 2)), [0, 0])
    assert (out.values[:, 1] > 0.999999).all()


def test_link_arithmetic():
    p = make_params(k=1, in_dim=1)
    p["linker.W.0"].values[:] = 2.0
    p["linker.b.0"].values[:] = -2.0
    assert link(Tape(), p, np.array([[1.0]]), [0]).item() == 0.5


def test_link_rejects_unknown_type():
    p = make_params()
    with pytest.raises(ValueError):
        link(Tape(), p, np.ones((1, 2)), [1])


def test_link_mixed_types_use_own_weights():
    p = make_params(num_node_types=2)
    x = np.random.default_rng(0).normal(size=(4, 2))
    mixed = link(Tape(), p, x, [0, 1, 1, 0]).values
    only0 = link(Tape(), p, x, [0] * 4).values
    only1 = link(Tape(), p, x, [1] * 4).values
    np.testing.assert_array_equal(mixed[[0, 3]], only0[[0, 3]])
    np.testing.assert_array_equal(mixed[[1, 2]], only1[[1, 2]])


def test_single_type_paths_agree_bit_identically():
    # a two-type model scoring newcomers of one type equals a one-type model with the same weights
    one = make_params(k=4, in_dim=3, hidden=5)
    two = make_params(k=4, in_dim=3, hidden=5, num_node_types=2)
    for name, t in one.tensors.items():
        two[name].values = t.values.copy()
    x = np.random.default_rng(1).normal(size=(6, 3))
    assert np.array_equal(link(Tape(), one, x, [0] * 6).values, link(Tape(), two, x, [0] * 6).values)


# --- augmented edges ------------------------------------------------------------

def test_augmented_empty_without_newcomers():
    adj = build_augmented(Tape(), 5, [0, 1], None)
    assert adj.nnz == 0 and adj.shape == (5, 5)


def test_augmented_one_newcomer_has_2k_entries():
    w = Tensor([[0.2, 0.9, 0.4]])
    adj = build_augmented(Tape(), 5, [4, 0, 2], w)
    assert adj.shape == (6, 6) and adj.nnz == 6
    dense = adj.to_scipy().toarray()
    np.testing.assert_array_equal(dense, dense.T)
    assert dense[5, 4] == 0.2 and dense[5, 0] == 0.9 and dense[2, 5] == 0.4


def test_augment_modes():
    w = Tensor([[0.2, 0.9, 0.5]])
    assert build_augmented(Tape(), 4, [0, 1, 2], w, mode="none").nnz == 0
    dense = build_augmented(Tape(), 4, [0, 1, 2], w, mode="unweighted").to_scipy().toarray()
    assert dense[4].tolist() == [0.0, 1.0, 1.0, 0.0, 0.0]


def test_augmented_rejects_foreign_anchor():
    with pytest.raises(ValueError):
        build_augmented(Tape(), 3, [5], Tensor([[0.5]]))


# --- encoder ----------------------------------------------------------------------

def test_encode_zero_weights():
    g = path_graph(3, dim=2)
    p = make_params(layers=2)
    zero_all(p)
    z = encode(Tape(), p, g.features, original_layers(g, 3), SparseAdj.empty(3))
    assert (z.values == 0).all()


def test_encode_identity_configuration():
    g = path_graph(3, dim=2)
    x = np.abs(np.random.default_rng(0).normal(size=(3, 2)))
    p = make_params()
    zero_all(p)
    p["gnn.E.0.self"].values = np.eye(2)
    z = encode(Tape(), p, x, original_layers(g, 3), SparseAdj.empty(3))
    np.testing.assert_array_equal(z.values, x)


def test_encode_path_aggregation():
    g = path_graph(3, dim=3)
    p = make_params(in_dim=3, hidden=3)
    zero_all(p)
    p["gnn.E.0.rel.0"].values = np.eye(3)
    z = encode(Tape(), p, np.eye(3), original_layers(g, 3), SparseAdj.empty(3))
    np.testing.assert_array_equal(z.values[1], [1.0, 0.0, 1.0])
    np.testing.assert_array_equal(z.values[0], [0.0, 1.0, 0.0])


def test_normalized_layers_weights():
    g = build_graph([(0, 1), (0, 2)], 3, np.zeros((3, 1)))
    dense = original_layers(g, 3, normalize=True)[0].to_scipy().toarray()
    assert dense[0, 1] == pytest.approx(1 / np.sqrt(2))


def test_encode_permutation_equivariant():
    rng = np.random.default_rng(3)
    g = random_graph(8, 0.4, rng, dim=4)
    p = make_params(in_dim=4, hidden=5, layers=2)
    perm = rng.permutation(8)
    inv = np.argsort(perm)
    h = build_graph([(inv[u], inv[v]) for u, v in g.edges], 8, g.features[perm])
    z = encode(Tape(), p, g.features, original_layers(g, 8), SparseAdj.empty(8)).values
    zp = encode(Tape(), p, h.features, original_layers(h, 8), SparseAdj.empty(8)).values
    np.testing.assert_allclose(zp, z[perm], atol=1e-12)


def test_edge_types_get_separate_weights():
    g = build_graph([(0, 1, 0), (1, 2, 1)], 3, np.eye(3), edge_type_names=["a", "b"])
    p = make_params(in_dim=3, hidden=3, num_edge_types=2)
    zero_all(p)
    p["gnn.E.0.rel.1"].values = np.eye(3)
    z = encode(Tape(), p, g.features, original_layers(g, 3), SparseAdj.empty(3)).values
    # only the type-1 edge (1, 2) carries messages
    np.testing.assert_array_equal(z, [[0, 0, 0], [0, 0, 1], [0, 1, 0]])


# --- decoder ----------------------------------------------------------------------

def test_decode_examples():
    tape = Tape()
    z = Tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 2.0], [3.0, -1.0]])
    out = decode(tape, z, [(0, 1), (0, 2), (3, 4)]).values[:, 0]
    assert out.tolist() == [1.0, 0.0, 1.0]


def test_decode_symmetric():
    z = Tensor(np.random.default_rng(0).normal(size=(5, 3)))
    pairs = np.array([(0, 1), (2, 4), (3, 3)])
    a = decode(Tape(), z, pairs).values
    b = decode(Tape(), z, pairs[:, ::-1]).values
    assert np.array_equal(a, b)


# --- end to end -------------------------------------------------------------------

def test_no_newcomers_reduces_to_plain_gnn():
    g = random_graph(6, 0.5, np.random.default_rng(0), dim=2)
    p = make_params(hidden=4, layers=2)
    fwd = embed(Tape(), p, g, [0, 1, 2])
    plain = encode(Tape(), p, g.features, original_layers(g, 6), SparseAdj.empty(6))
    assert fwd.augmented.nnz == 0 and np.array_equal(fwd.z.values, plain.values)


@pytest.mark.parametrize("seed", range(3))
def test_linker_gradient_through_pipeline(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(7, 0.4, rng, dim=3)
    p = ModelParams(ModelConfig(k=3, in_dim=3, hidden=4, layers=2), seed=seed)
    x_new = rng.normal(size=(2, 3))
    pos = np.array([[7, 0], [8, 1], [7, 8]])
    neg = np.array([[2], [3], [4]])

    def f(tape):
        fwd = embed(tape, p, g, [0, 1, 2], x_new, [0, 0])
        return gnn_loss(tape, fwd.z, pos, neg)

    w = p["linker.W.0"]
    err = max_grad_error(f, [w, p["linker.b.0"]])
    assert err < 1e-4
    assert np.abs(w.grad).max() > 0
