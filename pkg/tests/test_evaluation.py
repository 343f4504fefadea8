import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import leap.evaluation as ev
from leap.anchors import select_by_degree
from leap.evaluation import EvalReport, auc, average_precision, evaluate, summarize
from leap.graph import INDUCTIVE, TRANSDUCTIVE, EvalItems, SplitSpec, build_graph, make_split
from leap.model import ModelConfig, ModelParams

from helpers import brute_ap, brute_auc, score_lists

scores = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=8)


def test_auc_examples():
    assert auc([2], [1]) == 1.0
    assert auc([1], [1]) == 0.5
    assert auc([0.9, 0.4], [0.5, 0.1]) == 0.75


def test_ap_examples():
    assert average_precision([0.9, 0.8], [0.2, 0.1]) == 1.0
    assert average_precision([0.1], [0.9]) == 0.5
    # ranks: P N P N, precision 1 at rank 1 and 2/3 at rank 3
    assert average_precision([0.9, 0.4], [0.5, 0.1]) == pytest.approx(5 / 6, abs=1e-15)


def test_ap_ties_are_pessimistic():
    assert average_precision([1.0], [1.0]) == 0.5
    assert average_precision([1.0, 1.0], [1.0]) == pytest.approx((1 / 2 + 2 / 3) / 2)


def test_empty_inputs_raise():
    with pytest.raises(ValueError):
        auc([], [1.0])
    with pytest.raises(ValueError):
        average_precision([1.0], [])


def test_small_grid_matches_enumeration():
    for pos, neg in score_lists((0.0, 1.0), 5):
        assert auc(pos, neg) == brute_auc(pos, neg)
        assert average_precision(pos, neg) == brute_ap(pos, neg)


@settings(max_examples=200, deadline=None)
@given(pos=scores, neg=scores)
def test_metrics_match_oracles(pos, neg):
    assert auc(pos, neg) == brute_auc(pos, neg)
    assert average_precision(pos, neg) == brute_ap(pos, neg)


@settings(max_examples=100, deadline=None)
@given(pos=scores, neg=scores)
def test_auc_invariant_under_increasing_transform(pos, neg):
    f = lambda v: np.exp(np.asarray(v) / 3.0) * 7 - 2  # noqa: E731
    assert auc(pos, neg) == auc(f(pos), f(neg))
    assert average_precision(pos, neg) == average_precision(f(pos), f(neg))


@settings(max_examples=100, deadline=None)
@given(pos=scores, neg=scores)
def test_perfect_iff_separated(pos, neg):
    separated = min(pos) > max(neg)
    assert (auc(pos, neg) == 1.0) == separated
    assert (average_precision(pos, neg) == 1.0) == separated


# --- evaluation protocol ----------------------------------------------------------

@pytest.fixture(scope="module")
def er_split():
    rng = np.random.default_rng(0)
    n = 120
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.06]
    g = build_graph(pairs, n, rng.normal(size=(n, 4)))
    return make_split(g, SplitSpec(INDUCTIVE, seed=0))


def test_oracle_scores_are_perfect(er_split, monkeypatch):
    g = er_split.graph

    def oracle(params, split, items, anchors, pairs, augment="learned"):
        return np.array([1.0 if g.has_edge(int(u), int(v)) else 0.0 for u, v in pairs])

    monkeypatch.setattr(ev, "score_pairs", oracle)
    report = evaluate(None, er_split, er_split.test, None, seed=0)
    assert report.auc == 1.0 and report.ap == 1.0
    assert report.n_pos == report.n_neg == len(er_split.test.edges)


def test_negatives_are_non_edges_to_train_nodes(er_split):
    from leap.rng import SplitMix64

    neg = ev._sample_eval_negatives(er_split, er_split.test, SplitMix64(1))
    g = er_split.graph
    assert np.array_equal(neg[:, 0], er_split.test.edges[:, 0])
    assert (er_split.remap[neg[:, 1]] >= 0).all()
    assert not any(g.has_edge(int(u), int(v)) for u, v in neg)


def test_untrained_model_near_chance(er_split):
    g = er_split.train_graph
    anchors = select_by_degree(g, 10)
    params = ModelParams(ModelConfig(k=10, in_dim=4, hidden=16, layers=2, normalize_edges=True), seed=0)
    items = er_split.test
    assert len(items.edges) >= 50
    aucs = [evaluate(params, er_split, items, anchors, seed=s).auc for s in range(4)]
    assert abs(np.mean(aucs) - 0.5) < 0.1


def test_evaluate_is_seeded(er_split):
    g = er_split.train_graph
    anchors = select_by_degree(g, 10)
    params = ModelParams(ModelConfig(k=10, in_dim=4, hidden=8), seed=1)
    a = evaluate(params, er_split, er_split.valid, anchors, seed=3)
    b = evaluate(params, er_split, er_split.valid, anchors, seed=3)
    assert a == b


def test_leak_is_detected(er_split):
    bad = EvalItems(er_split.train_nodes[:2], er_split.test.edges)
    anchors = select_by_degree(er_split.train_graph, 5)
    params = ModelParams(ModelConfig(k=5, in_dim=4, hidden=4), seed=0)
    with pytest.raises(AssertionError):
        evaluate(params, er_split, bad, anchors)


def test_transductive_evaluation_runs():
    rng = np.random.default_rng(1)
    n = 50
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.15]
    g = build_graph(pairs, n, rng.normal(size=(n, 3)))
    split = make_split(g, SplitSpec(TRANSDUCTIVE, seed=0))
    params = ModelParams(ModelConfig(k=4, in_dim=3, hidden=4), seed=0)
    report = evaluate(params, split, split.test, select_by_degree(split.train_graph, 4))
    assert 0.0 <= report.auc <= 1.0 and report.n_neg == report.n_pos


def test_summarize_population_std():
    reports = [EvalReport(0.8, 0.7, 10, 10, 0), EvalReport(0.6, 0.5, 10, 10, 1)]
    s = summarize(reports, "toy", INDUCTIVE)
    assert s["mean_auc"] == pytest.approx(0.7) and s["std_auc"] == pytest.approx(0.1)
    assert s["std_ap"] > 0
    assert [r["seed"] for r in s["runs"]] == [0, 1]
    assert set(s) == {"dataset", "mode", "runs", "mean_auc", "std_auc", "mean_ap", "std_ap"}
