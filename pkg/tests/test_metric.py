import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from graphrecover.baselines import cosine_similarity_matrix, knn_graph, knn_neighbors
from graphrecover.embeddings import EmbeddingMatrix
from graphrecover.errors import UsageError, ValidationError
from graphrecover.graph import Graph
from graphrecover.metric import (EdgeProbabilityMatrix, MetricHeads, cosine_distance,
                                 edge_probabilities, fit_metric, gumbel_topk_graph,
                                 gumbel_topk_rows, metric_loss_and_grad, multihead_distance,
                                 pairwise_distance, sample_training_pairs)
from graphrecover.synthetic import erdos_renyi

vec = arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False)).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


def test_cosine_distance_cases():
    assert cosine_distance([1, 2], [1, 2]) == pytest.approx(0, abs=1e-15)
    assert cosine_distance([1, 0], [0, 1]) == 1
    assert cosine_distance([1, 0], [-1, 0]) == 2
    with pytest.raises(ValidationError):
        cosine_distance([0, 0], [1, 0])


def test_multihead_hand_case():
    heads = MetricHeads(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert multihead_distance([1, 1], [1, -1], heads) == pytest.approx(1.0)


@given(vec, vec)
def test_all_ones_heads_reduce_to_cosine(a, b):
    heads = MetricHeads.ones(3, 4)
    assert multihead_distance(a, b, heads) == pytest.approx(cosine_distance(a, b), abs=1e-12)
    assert multihead_distance(a, b, heads) == pytest.approx(multihead_distance(b, a, heads), abs=1e-15)


@given(vec, arrays(np.float64, (2, 4), elements=st.floats(0.1, 3)))
def test_self_distance_zero(a, w):
    assert multihead_distance(a, a, MetricHeads(w)) == pytest.approx(0, abs=1e-12)


def test_pairwise_matches_scalar():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(8, 5))
    heads = MetricHeads(rng.uniform(0.2, 2, size=(3, 5)))
    phi = pairwise_distance(h, heads)
    for i in range(8):
        for j in range(8):
            if i != j:
                assert phi[i, j] == pytest.approx(multihead_distance(h[i], h[j], heads), abs=1e-12)
    assert np.array_equal(phi, phi.T)


def test_edge_probability_values():
    h = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    p = edge_probabilities(h, tau=1.0).P
    assert p[0, 1] == pytest.approx(1.0)
    assert p[0, 2] == pytest.approx(math.exp(-1), abs=1e-12)
    assert np.all(np.diag(p) == 0)
    with pytest.raises(UsageError):
        edge_probabilities(h, tau=0)


def test_doubling_tau_squares_probabilities():
    h = np.random.default_rng(1).normal(size=(10, 4))
    p1 = edge_probabilities(h, tau=1.3).P
    p2 = edge_probabilities(h, tau=2.6).P
    assert np.allclose(p2, p1 ** 2, rtol=1e-12, atol=0)


def test_probabilities_monotone_in_distance():
    h = np.random.default_rng(2).normal(size=(12, 4))
    phi = pairwise_distance(h)
    p = edge_probabilities(h, tau=2.0).P
    iu, ju = np.triu_indices(12, 1)
    order = np.argsort(phi[iu, ju], kind="stable")
    pv = p[iu, ju][order]
    dv = phi[iu, ju][order]
    strict = np.diff(dv) > 0
    assert np.all(np.diff(pv)[strict] < 0)


def test_gumbel_k1_matches_categorical():
    # one dominant item among 5; frequencies over 10 000 seeds
    p = np.array([0.99, 0.01, 0.01, 0.01, 0.01])
    logp = np.log(p)[None, :]
    counts = np.zeros(5)
    for s in range(10_000):
        counts[gumbel_topk_rows(logp, 1, np.random.default_rng(s))[0, 0]] += 1
    assert np.abs(counts / 10_000 - p / p.sum()).max() < 0.02


def test_gumbel_tau_limit_is_knn():
    # points on a circle with quadratically growing spacing: every row's
    # nearest distances are separated by at least 0.02
    th = 0.08 * np.arange(8) ** 2
    h = np.stack([np.cos(th), np.sin(th)], axis=1)
    srt = np.sort(pairwise_distance(h) + np.eye(8) * 9, axis=1)
    assert np.diff(srt[:, :3], axis=1).min() > 0.02
    P = edge_probabilities(h, tau=1e3)
    ref = knn_neighbors(cosine_similarity_matrix(h), 2)
    for seed in range(50):
        logp = P.log() + np.diag(np.full(8, -np.inf))
        nbrs = gumbel_topk_rows(logp, 2, np.random.default_rng(seed))
        assert np.array_equal(nbrs, ref)


@given(st.integers(0, 1000), st.integers(1, 5))
def test_gumbel_graph_min_degree(seed, k):
    h = np.random.default_rng(seed).normal(size=(12, 3))
    g = gumbel_topk_graph(edge_probabilities(h, tau=2.0), k, seed)
    assert g.degrees().min() >= k
    assert np.all(np.diag(g.to_dense()) == 0)


def test_gumbel_scale_invariance():
    h = np.random.default_rng(4).normal(size=(15, 3))
    P = edge_probabilities(h, tau=1.5)
    scaled = EdgeProbabilityMatrix(P.P * 0.25, P.tau)
    assert gumbel_topk_graph(P, 3, 9) == gumbel_topk_graph(scaled, 3, 9)


def test_gumbel_k_range_checked():
    P = edge_probabilities(np.eye(4), tau=1)
    with pytest.raises(UsageError):
        gumbel_topk_graph(P, 4, 0)


def test_training_pairs():
    g = erdos_renyi(30, 0.1, seed=1)
    pairs, labels = sample_training_pairs(g, 5, np.random.default_rng(0))
    assert labels.sum() == g.num_edges
    neg = pairs[labels == 0]
    assert len(neg) == 5 * g.num_edges
    keys = set(map(tuple, neg.tolist()))
    assert len(keys) == len(neg)
    assert not keys & g.edge_set()
    assert np.all(neg[:, 0] < neg[:, 1])


@pytest.mark.parametrize("seed", range(20))
def test_metric_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    n_pairs, d, m = int(rng.integers(5, 20)), int(rng.integers(2, 7)), int(rng.integers(1, 5))
    x, y = rng.normal(size=(n_pairs, d)), rng.normal(size=(n_pairs, d))
    labels = (rng.random(n_pairs) < 0.4).astype(float)
    W = rng.uniform(0.5, 1.5, size=(m, d))
    tau = float(rng.uniform(0.5, 2.0))
    _, g = metric_loss_and_grad(W, x, y, labels, tau)
    num = oracles.central_diff(lambda w: metric_loss_and_grad(w, x, y, labels, tau)[0], W)
    assert oracles.rel_err(g, num) < 1e-4


def test_fit_metric_steps_zero_returns_input():
    h = np.random.default_rng(0).normal(size=(10, 3))
    heads = MetricHeads.ones(2, 3)
    assert fit_metric(heads, h, knn_graph(h, 2), steps=0) is heads


def test_fit_metric_loss_non_increasing():
    h = np.random.default_rng(5).normal(size=(40, 6))
    g = knn_graph(h, 3, trim=False)
    _, trace = fit_metric(MetricHeads.ones(4, 6), h, g, steps=25, lr=0.5, seed=1, tau=3.0,
                          return_trace=True)
    assert all(b <= a + 1e-6 for a, b in zip(trace, trace[1:]))
    assert trace[-1] < trace[0]


def test_fit_metric_planted_signal():
    # edges are defined by coordinates 0..3 only; coordinates 4..7 are noise
    rng = np.random.default_rng(7)
    signal = rng.normal(size=(80, 4))
    h = np.hstack([signal, rng.normal(size=(80, 4)) * 1.0])
    g = knn_graph(signal, 4, trim=False)
    heads = fit_metric(MetricHeads.ones(4, 8), h, g, steps=200, lr=1.0, seed=0, tau=3.0)
    w2 = heads.W ** 2
    assert w2[:, :4].sum() > w2[:, 4:].sum()


def test_fit_metric_needs_edges():
    with pytest.raises(ValidationError):
        fit_metric(MetricHeads.ones(1, 2), np.eye(3)[:, :2] + 1, Graph.empty(3))


def test_heads_validation():
    with pytest.raises(ValidationError):
        MetricHeads(np.ones(3))
    assert MetricHeads.ones(16, 4).m == 16
