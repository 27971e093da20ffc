import numpy as np
import pytest

from graphrecover.attack import AttackConfig, run_attack
from graphrecover.defense import (NoiseConfig, laplace_noise, link_prediction_precision,
                                  perturb_embeddings, tradeoff_sweep)
from graphrecover.embeddings import EmbeddingMatrix, spectral_embedding
from graphrecover.errors import UsageError
from graphrecover.evaluation import edge_prf
from graphrecover.graph import Graph
from graphrecover.synthetic import complete_graph, disjoint_union, erdos_renyi, stochastic_block_model


@pytest.mark.parametrize("mu,b", [(0.0, 1.0), (0.3, 0.5), (-1.0, 2.0)])
def test_laplace_moments(mu, b):
    x = laplace_noise(1_000_000, mu, b, np.random.default_rng(7))
    assert abs(x.mean() - mu) < 0.01
    assert abs(x.var() / (2 * b * b) - 1) < 0.02


def test_tiny_noise_is_identity():
    h = EmbeddingMatrix(np.random.default_rng(0).normal(size=(20, 4)))
    assert np.allclose(perturb_embeddings(h, NoiseConfig(1e-12)).data, h.data, atol=1e-9, rtol=0)


def test_perturb_reproducible():
    h = EmbeddingMatrix(np.zeros((5, 3)))
    a = perturb_embeddings(h, NoiseConfig(0.5, seed=4)).data
    assert np.array_equal(a, perturb_embeddings(h, NoiseConfig(0.5, seed=4)).data)
    assert not np.array_equal(a, perturb_embeddings(h, NoiseConfig(0.5, seed=5)).data)


def test_noise_config_validation():
    with pytest.raises(UsageError):
        NoiseConfig(0.0)


def test_deviation_monotone_in_b():
    h = EmbeddingMatrix(np.zeros((200, 50)))
    devs = [np.abs(perturb_embeddings(h, NoiseConfig(b, seed=1)).data).mean()
            for b in (0.1, 0.2, 0.5, 1.0)]
    assert all(x < y for x, y in zip(devs, devs[1:]))
    assert devs[-1] == pytest.approx(1.0, rel=0.02)  # E|X - mu| = b


def test_utility_perfect_on_disjoint_cliques():
    g = disjoint_union(complete_graph(8), complete_graph(8))
    # two components: the two leading eigenvectors are the clique indicators
    assert link_prediction_precision(spectral_embedding(g, 2, seed=0), g) == 1.0


def test_utility_null_model():
    g = erdos_renyi(100, 0.05, seed=3)
    pairs = 100 * 99 // 2
    m = g.num_edges
    density = m / pairs
    # hypergeometric: m draws from `pairs` items with m successes
    sd = np.sqrt(m * density * (1 - density) * (pairs - m) / (pairs - 1)) / m
    vals = [link_prediction_precision(np.random.default_rng(s).normal(size=(100, 16)), g)
            for s in range(20)]
    assert abs(np.mean(vals) - density) <= 3 * sd / np.sqrt(len(vals))
    for v in vals:
        assert abs(v - density) <= 5 * sd


def test_utility_deterministic_and_checked():
    g = erdos_renyi(30, 0.2, seed=1)
    h = np.random.default_rng(0).normal(size=(30, 5))
    assert link_prediction_precision(h, g) == link_prediction_precision(h, g)
    with pytest.raises(UsageError):
        link_prediction_precision(h, Graph.empty(30))
    with pytest.raises(UsageError):
        link_prediction_precision(h[:10], g)


def test_sweep_zero_row_matches_unperturbed():
    g = stochastic_block_model([25, 25], 0.3, 0.02, seed=2)
    h = spectral_embedding(g, 8, seed=2)
    cfg = AttackConfig(k=6, iters=3, seed=1)
    rows = tradeoff_sweep(h, g, [0.0, 0.3], cfg, noise_seed=9)
    rec, _ = run_attack(h, cfg)
    assert rows[0].f1 == edge_prf(g, rec)[2]
    assert rows[0].utility == link_prediction_precision(h, g)
    assert [r.b for r in rows] == [0.0, 0.3]
    with pytest.raises(UsageError):
        tradeoff_sweep(h, g, [-0.1], cfg)
